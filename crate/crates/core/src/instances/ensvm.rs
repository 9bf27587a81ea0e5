//! Elastic-net constrained least squares,
//!
//! ```text
//! min ½‖Au − b‖²   s.t.   λ‖u‖₁ + (1 − λ)‖u‖² ≤ δ,
//! ```
//!
//! built from a planted sparse `u_true` with `b = A·u_true` and
//! `δ = λ‖u_true‖₁ + (1 − λ)‖u_true‖²`, so `u_true` is optimal with value 0.

use std::sync::Arc;

use ndarray::{s, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::auglag::{dual_bound_orthant, DualBoundInput};
use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, norm_sq};
use crate::model::{
    elastic_net_linearized_prox, elastic_net_value, least_squares_block_gradient, residual,
    BlockLayout, BlockModel, BlockVector, ConstraintBlock, CoreFunction, ProblemSpec, SaddlePoint,
    Smooth, StepConstants,
};
use crate::rng::Rng;

/// Named generator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsvmPreset {
    pub name: &'static str,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub lambda: f64,
    pub blocks: &'static [usize],
}

pub const PRESETS: &[EnsvmPreset] = &[
    EnsvmPreset {
        name: "ensvm-desk",
        m: 50,
        n: 200,
        s: 5,
        lambda: 0.4,
        blocks: &[10],
    },
    EnsvmPreset {
        name: "ensvm-small",
        m: 10,
        n: 40,
        s: 3,
        lambda: 0.4,
        blocks: &[1],
    },
    EnsvmPreset {
        name: "ensvm-fig1-text",
        m: 200,
        n: 2000,
        s: 10,
        lambda: 0.4,
        blocks: &[5, 10, 50, 100],
    },
    EnsvmPreset {
        name: "ensvm-fig2-text",
        m: 500,
        n: 5000,
        s: 25,
        lambda: 0.4,
        blocks: &[5, 10, 50, 100],
    },
];

pub fn preset(name: &str) -> Option<&'static EnsvmPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsvmInstance {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub seed: u64,
    pub lambda: f64,
    pub delta: f64,
    pub a: Arc<Array2<f64>>,
    pub b: Vec<f64>,
    pub u_true: Vec<f64>,
    layout: Arc<BlockLayout>,
}

/// Which form of the closed-form block update to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateForm {
    /// `r = (uᵢ − εAᵢᵀ(Au − b)) / (1 + 2ε(1−λ)q)`, the minimizer of the block subproblem.
    #[default]
    Descent,
    /// `r = (uᵢ + εAᵢᵀ(Au − b)) / (1 + 2ε(1−λ)q)`, kept for comparison only.
    AscentSign,
}

/// Builds an instance. `A` is drawn row-major from `N(0, 1)`, then the support of
/// `u_true` (uniform without replacement), then its nonzero values, all from one
/// generator seeded with `seed`.
pub fn gen_ensvm(m: usize, n: usize, s: usize, lambda: f64, seed: u64) -> Result<EnsvmInstance> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("m and n must be >= 1".into()));
    }
    if s == 0 || s > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity must satisfy 0 < s <= n, got s={s}, n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be in [0, 1], got {lambda}"
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let a = Array2::from_shape_fn((m, n), |_| rng.normal());
    let support = rng.sample_without_replacement(n, s);
    let mut u_true = vec![0.0; n];
    for j in support {
        u_true[j] = rng.normal();
    }
    EnsvmInstance::from_parts(a, u_true, lambda, seed, s)
}

impl EnsvmInstance {
    fn from_parts(
        a: Array2<f64>,
        u_true: Vec<f64>,
        lambda: f64,
        seed: u64,
        s: usize,
    ) -> Result<Self> {
        let (m, n) = a.dim();
        check_len(n, u_true.len())?;
        let b = a.dot(&ArrayView1::from(&u_true[..])).to_vec();
        let delta = elastic_net_value(lambda, &u_true);
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(
                "planted solution gives delta = 0".into(),
            ));
        }
        Ok(Self {
            m,
            n,
            s,
            seed,
            lambda,
            delta,
            a: Arc::new(a),
            b,
            u_true,
            layout: Arc::new(BlockLayout::equal(n, 1)?),
        })
    }

    /// Splits the variables into `blocks` equal blocks (the last absorbs any remainder).
    pub fn with_blocks(mut self, blocks: usize) -> Result<Self> {
        self.layout = Arc::new(BlockLayout::equal(self.n, blocks)?);
        Ok(self)
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn n_blocks(&self) -> usize {
        self.layout.n_blocks()
    }

    /// `Θ(u) = λ‖u‖₁ + (1 − λ)‖u‖² − δ`
    pub fn theta(&self, u: &[f64]) -> f64 {
        elastic_net_value(self.lambda, u) - self.delta
    }

    /// `½‖Au − b‖²`
    pub fn objective(&self, u: &[f64]) -> f64 {
        0.5 * norm_sq(&residual(&self.a, &self.b, u))
    }

    /// `‖A‖₂²` by power iteration on `AᵀA`, inflated by 1% to cover the iteration error.
    pub fn smooth_lipschitz(&self) -> f64 {
        let mut rng = Rng::seed_from_u64(self.seed ^ 0xA11CE);
        let mut v = rng.normal_vec(self.n);
        let mut estimate = 0.0;
        for _ in 0..500 {
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            let av = self.a.dot(&ArrayView1::from(&v[..]));
            let w = self.a.t().dot(&av).to_vec();
            let next = norm(&w);
            let done = (next - estimate).abs() <= 1e-12 * next;
            estimate = next;
            v = w;
            if done {
                break;
            }
        }
        1.01 * estimate
    }

    /// Radius of the region where the constraint's Lipschitz constant is evaluated:
    /// twice the radius of the feasible set.
    pub fn working_radius(&self) -> f64 {
        let feasible = if self.lambda < 1.0 {
            (self.delta / (1.0 - self.lambda)).sqrt()
        } else {
            self.delta
        };
        2.0 * feasible
    }

    /// `τ = λ√n + 2(1 − λ)R` on the ball of radius `R = working_radius()`.
    pub fn constraint_lipschitz(&self) -> f64 {
        self.lambda * (self.n as f64).sqrt() + 2.0 * (1.0 - self.lambda) * self.working_radius()
    }

    pub fn step_constants(&self) -> StepConstants {
        StepConstants {
            n_blocks: self.n_blocks(),
            beta: 1.0,
            smooth_lipschitz: self.smooth_lipschitz(),
            constraint_lipschitz: self.constraint_lipschitz(),
        }
    }

    /// Slater data at `û = 0`: `Θ(0) = −δ` and the objective is bounded below by 0.
    pub fn slater_input(&self) -> DualBoundInput {
        DualBoundInput {
            slater_point: vec![0.0; self.n],
            objective_lower_bound: 0.0,
            constraint_at_slater: vec![-self.delta],
            soc_norm_index: None,
        }
    }

    /// `μ = ‖b‖²/2δ + 1`.
    pub fn dual_bound(&self) -> f64 {
        dual_bound_orthant(&self.slater_input(), 0.5 * norm_sq(&self.b))
            .expect("delta > 0 makes u = 0 a Slater point")
    }

    /// `(u_true, 0)`: the planted point has zero residual, so zero multiplier satisfies
    /// stationarity and complementarity.
    pub fn saddle_point(&self) -> SaddlePoint {
        SaddlePoint {
            u: BlockVector::from_flat(self.layout.clone(), self.u_true.clone()).unwrap(),
            p: vec![0.0],
        }
    }

    /// The instance as a generic problem: least-squares coupling, an elastic-net
    /// constraint block per block, offset `−δ`.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let blocks = self.n_blocks();
        ProblemSpec::builder((*self.layout).clone(), Cone::orthant(1)?)
            .smooth(
                Smooth::LeastSquares {
                    a: self.a.clone(),
                    b: self.b.clone(),
                },
                self.smooth_lipschitz(),
            )
            .constraints(vec![
                ConstraintBlock::ElasticNet {
                    lambda: self.lambda
                };
                blocks
            ])
            .constraint_offset(vec![-self.delta])
            .constraint_lipschitz(self.constraint_lipschitz())
            .build()
    }

    /// Specialised model that keeps the residual `Au − b` up to date.
    pub fn fast_model(&self) -> EnsvmModel<'_> {
        EnsvmModel::new(self, UpdateForm::Descent)
    }

    pub fn to_file(&self) -> EnsvmFile {
        EnsvmFile {
            format: FILE_FORMAT.to_string(),
            version: FILE_VERSION,
            m: self.m,
            n: self.n,
            s: self.s,
            seed: self.seed,
            lambda: self.lambda,
            delta: self.delta,
            blocks: self.n_blocks(),
            a: self.a.iter().copied().collect(),
            b: self.b.clone(),
            u_true: self.u_true.clone(),
        }
    }

    pub fn from_file(file: EnsvmFile) -> Result<Self> {
        if file.format != FILE_FORMAT || file.version != FILE_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported instance format {} v{}",
                file.format, file.version
            )));
        }
        check_len(file.m * file.n, file.a.len())?;
        check_len(file.m, file.b.len())?;
        check_len(file.n, file.u_true.len())?;
        let a = Array2::from_shape_vec((file.m, file.n), file.a)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(Self {
            m: file.m,
            n: file.n,
            s: file.s,
            seed: file.seed,
            lambda: file.lambda,
            delta: file.delta,
            a: Arc::new(a),
            b: file.b,
            u_true: file.u_true,
            layout: Arc::new(BlockLayout::equal(file.n, file.blocks)?),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnsvmFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::from_file(file)
    }
}

const FILE_FORMAT: &str = "conecoord-ensvm";
const FILE_VERSION: u32 = 1;

/// Self-describing JSON layout of an instance; `a` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsvmFile {
    pub format: String,
    pub version: u32,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub seed: u64,
    pub lambda: f64,
    pub delta: f64,
    pub blocks: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub u_true: Vec<f64>,
}

/// Closed-form block minimizer given the block gradient `grad = Aᵢᵀ(Au − b)`:
/// `sign(r)·max(0, |r| − ελq/(1 + 2ε(1−λ)q))`.
pub fn ensvm_closed_form(
    lambda: f64,
    current: &[f64],
    grad: &[f64],
    q: f64,
    eps: f64,
    form: UpdateForm,
) -> Vec<f64> {
    let sign = match form {
        UpdateForm::Descent => -1.0,
        UpdateForm::AscentSign => 1.0,
    };
    let v: Vec<f64> = current
        .iter()
        .zip(grad)
        .map(|(x, g)| x + sign * eps * g)
        .collect();
    elastic_net_linearized_prox(lambda, q, eps, &v)
}

fn check_update_args(q: f64, eps: f64) -> Result<()> {
    if q < 0.0 {
        return Err(Error::InvalidArgument(format!("q must be >= 0, got {q}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step must be > 0, got {eps}"
        )));
    }
    Ok(())
}

/// New value of block `block` for the EN-SVM subproblem at `u`.
pub fn ensvm_block_update(
    inst: &EnsvmInstance,
    u: &[f64],
    block: usize,
    q: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    ensvm_block_update_with(inst, u, block, q, eps, UpdateForm::Descent)
}

pub fn ensvm_block_update_with(
    inst: &EnsvmInstance,
    u: &[f64],
    block: usize,
    q: f64,
    eps: f64,
    form: UpdateForm,
) -> Result<Vec<f64>> {
    check_update_args(q, eps)?;
    check_len(inst.n, u.len())?;
    if block >= inst.n_blocks() {
        return Err(Error::InvalidArgument(format!("no block {block}")));
    }
    let range = inst.layout.range(block);
    let r = residual(&inst.a, &inst.b, u);
    let grad = least_squares_block_gradient(&inst.a, &r, range.clone());
    Ok(ensvm_closed_form(
        inst.lambda,
        &u[range],
        &grad,
        q,
        eps,
        form,
    ))
}

/// `min{max[p + γΘ(u_next), 0], μ}`, including the `−γδ` term of `Θ`.
pub fn ensvm_dual_update(inst: &EnsvmInstance, u_next: &[f64], p: f64, gamma: f64, mu: f64) -> f64 {
    (p + gamma * inst.theta(u_next)).max(0.0).min(mu)
}

/// [`BlockModel`] for EN-SVM that maintains `Au − b` incrementally, so a block update
/// costs `O(m·nᵢ)` instead of `O(m·n)`.
#[derive(Debug, Clone)]
pub struct EnsvmModel<'a> {
    inst: &'a EnsvmInstance,
    cone: Cone,
    core: CoreFunction,
    constants: StepConstants,
    residual: Vec<f64>,
    form: UpdateForm,
}

impl<'a> EnsvmModel<'a> {
    pub fn new(inst: &'a EnsvmInstance, form: UpdateForm) -> Self {
        Self {
            inst,
            cone: Cone::orthant(1).expect("dimension 1"),
            core: CoreFunction::HalfSquaredNorm,
            constants: inst.step_constants(),
            residual: inst.b.iter().map(|x| -x).collect(),
            form,
        }
    }

    pub fn instance(&self) -> &EnsvmInstance {
        self.inst
    }
}

impl BlockModel for EnsvmModel<'_> {
    fn layout(&self) -> &Arc<BlockLayout> {
        &self.inst.layout
    }

    fn cone(&self) -> &Cone {
        &self.cone
    }

    fn core(&self) -> &CoreFunction {
        &self.core
    }

    fn step_constants(&self) -> StepConstants {
        self.constants
    }

    fn objective(&self, u: &BlockVector) -> f64 {
        self.inst.objective(u.as_slice())
    }

    fn constraint_value(&self, u: &BlockVector) -> Vec<f64> {
        vec![self.inst.theta(u.as_slice())]
    }

    fn prepare(&mut self, u: &BlockVector) {
        self.residual = residual(&self.inst.a, &self.inst.b, u.as_slice());
    }

    fn solve_block(
        &mut self,
        u: &BlockVector,
        block: usize,
        q: &[f64],
        eps: f64,
    ) -> Result<Vec<f64>> {
        check_update_args(q[0], eps)?;
        let range = self.inst.layout.range(block);
        let grad = least_squares_block_gradient(&self.inst.a, &self.residual, range);
        Ok(ensvm_closed_form(
            self.inst.lambda,
            u.block(block),
            &grad,
            q[0],
            eps,
            self.form,
        ))
    }

    fn block_replaced(&mut self, block: usize, old: &[f64], new: &[f64]) {
        let range = self.inst.layout.range(block);
        let cols = self.inst.a.slice(s![.., range]);
        let delta: Vec<f64> = new.iter().zip(old).map(|(x, y)| x - y).collect();
        let change = cols.dot(&ArrayView1::from(&delta[..]));
        for (r, c) in self.residual.iter_mut().zip(change.iter()) {
            *r += c;
        }
    }
}
