use serde::{Deserialize, Serialize};

/// One thinned record of a solver run.
///
/// Row `k` describes the state before step `k`: the iterate `uᵏ` (or the running
/// average through `k`), the step `εᵏ` and the block `i(k)` about to be updated.
/// The final row has no block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u64,
    pub block: Option<usize>,
    pub eps: f64,
    /// `(G + J)` at the traced point.
    pub objective: f64,
    /// `|(G + J) − optimal value|`, when the optimal value is known.
    pub suboptimality: Option<f64>,
    /// `dist₋C(Θ)` at the traced point.
    pub feasibility: f64,
    /// `‖qᵏ − pᵏ‖`
    pub dual_residual: f64,
    pub lyapunov: Option<f64>,
    pub wall_ns: u64,
}

/// Current iterates `(uᵏ, pᵏ)` and steps `εᵏ` at the iterations in `ks`, kept only on request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub ks: Vec<u64>,
    pub iterates: Vec<Vec<f64>>,
    pub duals: Vec<Vec<f64>>,
    pub steps: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub thinning: u64,
    pub records: Vec<IterationRecord>,
    pub history: Option<History>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}
