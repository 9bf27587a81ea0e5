//! The block-separable problem
//!
//! ```text
//! min  G(u) + Σᵢ Jᵢ(uᵢ)   s.t.  Σᵢ Θᵢ(uᵢ) ∈ −C,  uᵢ ∈ Uᵢ
//! ```
//!
//! together with the core function `K` whose Bregman-like distance `D`
//! regularizes the block subproblems.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};

use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm1, norm_sq, soft_threshold, sub};

/// Partition of `0..n` into `N` contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    offsets: Vec<usize>,
}

impl BlockLayout {
    /// `n` variables in `blocks` blocks of size `n / blocks`; the last block absorbs the remainder.
    pub fn equal(n: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || blocks > n {
            return Err(Error::InvalidArgument(format!(
                "cannot split {n} variables into {blocks} blocks"
            )));
        }
        let size = n / blocks;
        let mut offsets: Vec<usize> = (0..blocks).map(|i| i * size).collect();
        offsets.push(n);
        Ok(Self { offsets })
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "block sizes must be nonempty and positive".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { offsets })
    }

    pub fn n_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    pub fn block_len(&self, block: usize) -> usize {
        self.offsets[block + 1] - self.offsets[block]
    }
}

/// A primal point split into blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    layout: Arc<BlockLayout>,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let n = layout.total();
        Self {
            layout,
            data: vec![0.0; n],
        }
    }

    pub fn from_flat(layout: Arc<BlockLayout>, data: Vec<f64>) -> Result<Self> {
        check_len(layout.total(), data.len())?;
        Ok(Self { layout, data })
    }

    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Result<Self> {
        let sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
        let layout = Arc::new(BlockLayout::from_sizes(&sizes)?);
        Ok(Self {
            layout,
            data: blocks.concat(),
        })
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn n_blocks(&self) -> usize {
        self.layout.n_blocks()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.layout.range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout.range(i);
        &mut self.data[r]
    }

    pub fn set_block(&mut self, i: usize, values: &[f64]) -> Result<()> {
        check_len(self.layout.block_len(i), values.len())?;
        self.block_mut(i).copy_from_slice(values);
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn into_blocks(self) -> Vec<Vec<f64>> {
        (0..self.n_blocks())
            .map(|i| self.block(i).to_vec())
            .collect()
    }

    fn check_same_shape(&self, other: &BlockVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::InvalidArgument("block layouts differ".into()));
        }
        Ok(())
    }
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// The function `K` behind the proximal term `D(u, v) = K(u) − K(v) − ⟨∇K(v), u − v⟩`.
#[derive(Clone)]
pub enum CoreFunction {
    /// `K = ½‖·‖²`, so `D(u, v) = ½‖u − v‖²` and `β = B = 1`.
    HalfSquaredNorm,
    /// User-supplied `K` with strong-convexity constant `beta` and gradient-Lipschitz constant `lipschitz`.
    Custom {
        value: Arc<ScalarFn>,
        gradient: Arc<VectorFn>,
        beta: f64,
        lipschitz: f64,
    },
}

impl fmt::Debug for CoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HalfSquaredNorm => f.write_str("HalfSquaredNorm"),
            Self::Custom {
                beta, lipschitz, ..
            } => f
                .debug_struct("Custom")
                .field("beta", beta)
                .field("lipschitz", lipschitz)
                .finish_non_exhaustive(),
        }
    }
}

impl CoreFunction {
    pub fn custom(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        beta: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta <= lipschitz) {
            return Err(Error::InvalidArgument(format!(
                "core constants need 0 < beta <= B, got beta={beta}, B={lipschitz}"
            )));
        }
        Ok(Self::Custom {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            beta,
            lipschitz,
        })
    }

    pub fn beta(&self) -> f64 {
        match self {
            Self::HalfSquaredNorm => 1.0,
            Self::Custom { beta, .. } => *beta,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::HalfSquaredNorm => 1.0,
            Self::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_len(u.len(), v.len())?;
        Ok(match self {
            Self::HalfSquaredNorm => 0.5 * norm_sq(&sub(u, v)),
            Self::Custom {
                value, gradient, ..
            } => {
                let d = sub(u, v);
                (value(u) - value(v) - dot(&gradient(v), &d)).max(0.0)
            }
        })
    }
}

pub fn bregman_d(core: &CoreFunction, u: &BlockVector, v: &BlockVector) -> Result<f64> {
    u.check_same_shape(v)?;
    core.distance(u.as_slice(), v.as_slice())
}

/// A smooth convex term supplied by the caller.
pub trait SmoothFunction: Send + Sync {
    fn value(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64]) -> Vec<f64>;
    fn block_gradient(&self, u: &[f64], range: Range<usize>) -> Vec<f64> {
        self.gradient(u)[range].to_vec()
    }
}

/// The coupling term `G`.
#[derive(Clone)]
pub enum Smooth {
    Zero,
    /// `½‖u − center‖²`
    ShiftedQuadratic {
        center: Vec<f64>,
    },
    /// `½‖A u − b‖²`
    LeastSquares {
        a: Arc<Array2<f64>>,
        b: Vec<f64>,
    },
    Custom(Arc<dyn SmoothFunction>),
}

impl fmt::Debug for Smooth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::ShiftedQuadratic { center } => f
                .debug_struct("ShiftedQuadratic")
                .field("dim", &center.len())
                .finish(),
            Self::LeastSquares { a, .. } => f
                .debug_struct("LeastSquares")
                .field("shape", &a.dim())
                .finish(),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Smooth {
    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::ShiftedQuadratic { center } => 0.5 * norm_sq(&sub(u, center)),
            Self::LeastSquares { a, b } => 0.5 * norm_sq(&residual(a, b, u)),
            Self::Custom(f) => f.value(u),
        }
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        self.block_gradient(u, 0..u.len())
    }

    pub fn block_gradient(&self, u: &[f64], range: Range<usize>) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; range.len()],
            Self::ShiftedQuadratic { center } => range.map(|j| u[j] - center[j]).collect(),
            Self::LeastSquares { a, b } => {
                let r = residual(a, b, u);
                least_squares_block_gradient(a, &r, range)
            }
            Self::Custom(f) => f.block_gradient(u, range),
        }
    }
}

/// `A u − b`
pub(crate) fn residual(a: &Array2<f64>, b: &[f64], u: &[f64]) -> Vec<f64> {
    let au = a.dot(&ArrayView1::from(u));
    au.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `A_blockᵀ r`
pub(crate) fn least_squares_block_gradient(
    a: &Array2<f64>,
    r: &[f64],
    range: Range<usize>,
) -> Vec<f64> {
    let cols = a.slice(ndarray::s![.., range]);
    cols.t().dot(&ArrayView1::from(r)).to_vec()
}

/// A nonsmooth block term given through its proximal operator.
pub trait ProxFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// `argmin_y σ f(y) + ½‖y − v‖²`
    fn prox(&self, v: &[f64], sigma: f64) -> Vec<f64>;
}

/// The block term `Jᵢ`.
#[derive(Clone)]
pub enum Regularizer {
    Zero,
    /// `w‖x‖₁`
    L1 {
        weight: f64,
    },
    /// `(w/2)‖x‖²`
    SquaredNorm {
        weight: f64,
    },
    /// `l1‖x‖₁ + l2‖x‖²`
    ElasticNet {
        l1: f64,
        l2: f64,
    },
    Custom(Arc<dyn ProxFunction>),
}

impl fmt::Debug for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::L1 { weight } => write!(f, "L1({weight})"),
            Self::SquaredNorm { weight } => write!(f, "SquaredNorm({weight})"),
            Self::ElasticNet { l1, l2 } => write!(f, "ElasticNet({l1}, {l2})"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Regularizer {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::L1 { weight } => weight * norm1(x),
            Self::SquaredNorm { weight } => 0.5 * weight * norm_sq(x),
            Self::ElasticNet { l1, l2 } => l1 * norm1(x) + l2 * norm_sq(x),
            Self::Custom(f) => f.value(x),
        }
    }

    pub fn prox(&self, v: &[f64], sigma: f64) -> Vec<f64> {
        match self {
            Self::Zero => v.to_vec(),
            Self::L1 { weight } => v
                .iter()
                .map(|x| soft_threshold(*x, sigma * weight))
                .collect(),
            Self::SquaredNorm { weight } => v.iter().map(|x| x / (1.0 + sigma * weight)).collect(),
            Self::ElasticNet { l1, l2 } => v
                .iter()
                .map(|x| soft_threshold(*x, sigma * l1) / (1.0 + 2.0 * sigma * l2))
                .collect(),
            Self::Custom(f) => f.prox(v, sigma),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}

/// A nonlinear block constraint map supplied by the caller.
pub trait NonlinearConstraint: Send + Sync {
    /// `Θᵢ(x)`, a vector of the cone dimension.
    fn value(&self, x: &[f64]) -> Vec<f64>;
    /// `argmin_y s⟨q, Θᵢ(y)⟩ + ½‖y − v‖²`, when available in closed form.
    fn linearized_prox(&self, _q: &[f64], _step: f64, _v: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// The block map `Θᵢ`.
#[derive(Clone)]
pub enum ConstraintBlock {
    Zero,
    /// `Mᵢ x` with `Mᵢ` of shape `m × nᵢ`.
    Linear(Arc<Array2<f64>>),
    /// Scalar `λ‖x‖₁ + (1 − λ)‖x‖²` (cone dimension 1).
    ElasticNet {
        lambda: f64,
    },
    Custom(Arc<dyn NonlinearConstraint>),
}

impl fmt::Debug for ConstraintBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Linear(m) => write!(f, "Linear{:?}", m.dim()),
            Self::ElasticNet { lambda } => write!(f, "ElasticNet({lambda})"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl ConstraintBlock {
    fn value(&self, x: &[f64], m: usize) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; m],
            Self::Linear(mat) => mat.dot(&ArrayView1::from(x)).to_vec(),
            Self::ElasticNet { lambda } => vec![elastic_net_value(*lambda, x)],
            Self::Custom(c) => c.value(x),
        }
    }
}

pub(crate) fn elastic_net_value(lambda: f64, x: &[f64]) -> f64 {
    lambda * norm1(x) + (1.0 - lambda) * norm_sq(x)
}

/// `argmin_y s·q·(λ‖y‖₁ + (1−λ)‖y‖²) + ½‖y − v‖²` for `q ≥ 0`.
pub(crate) fn elastic_net_linearized_prox(lambda: f64, q: f64, step: f64, v: &[f64]) -> Vec<f64> {
    let denom = 1.0 + 2.0 * step * (1.0 - lambda) * q;
    let threshold = step * lambda * q / denom;
    v.iter()
        .map(|x| soft_threshold(x / denom, threshold))
        .collect()
}

/// The set `Uᵢ`. Block updates clamp the unconstrained prox into it, which is the
/// constrained minimizer only when the block terms separate by coordinate, as in every
/// shipped regularizer and constraint block.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Whole,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleSet {
    pub fn project(&self, x: &mut [f64]) {
        if let Self::Box { lower, upper } = self {
            for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
                *v = v.clamp(*lo, *hi);
            }
        }
    }
}

/// Solves a whole block subproblem
/// `argmin_{x∈Uᵢ} ⟨g, x⟩ + Jᵢ(x) + ⟨q, Θᵢ(x)⟩ + (1/ε) Dᵢ(x, current)`.
pub trait BlockSubproblemSolver: Send + Sync {
    fn solve(&self, block: usize, grad: &[f64], q: &[f64], eps: f64, current: &[f64]) -> Vec<f64>;
}

/// A primal-dual pair known to be a saddle point of the Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub u: BlockVector,
    pub p: Vec<f64>,
}

/// Constants entering the step bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConstants {
    pub n_blocks: usize,
    /// Strong convexity of the core function.
    pub beta: f64,
    /// Lipschitz constant of `∇G`.
    pub smooth_lipschitz: f64,
    /// Lipschitz constant of `Θ`.
    pub constraint_lipschitz: f64,
}

/// `ε̄ = Nβ / (N·B_G + γτ²)`. Step sizes must stay strictly below it.
pub fn max_step_bound(constants: &StepConstants, gamma: f64) -> Result<f64> {
    let StepConstants {
        n_blocks,
        beta,
        smooth_lipschitz,
        constraint_lipschitz,
    } = *constants;
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    if !(beta > 0.0) || n_blocks == 0 {
        return Err(Error::InvalidArgument(
            "beta and the block count must be positive".into(),
        ));
    }
    if !(smooth_lipschitz >= 0.0) || !(constraint_lipschitz >= 0.0) {
        return Err(Error::InvalidArgument(
            "Lipschitz constants must be nonnegative".into(),
        ));
    }
    let n = n_blocks as f64;
    let denom = n * smooth_lipschitz + gamma * constraint_lipschitz * constraint_lipschitz;
    Ok(if denom == 0.0 {
        f64::INFINITY
    } else {
        n * beta / denom
    })
}

/// Everything the primal-dual iterations need from a problem.
///
/// [`ProblemSpec`] implements it generically; instances with cheaper
/// specialised block updates provide their own implementation.
pub trait BlockModel {
    fn layout(&self) -> &Arc<BlockLayout>;
    fn cone(&self) -> &Cone;
    fn core(&self) -> &CoreFunction;
    fn step_constants(&self) -> StepConstants;
    /// `(G + J)(u)`
    fn objective(&self, u: &BlockVector) -> f64;
    /// `Θ(u)`
    fn constraint_value(&self, u: &BlockVector) -> Vec<f64>;
    fn project_feasible(&self, _u: &mut BlockVector) {}
    /// Called before a sequence of block solves at `u`, and whenever the iterate is reset.
    fn prepare(&mut self, _u: &BlockVector) {}
    /// Solves the block subproblem for `block` at the current iterate `u` with multiplier estimate `q`.
    fn solve_block(
        &mut self,
        u: &BlockVector,
        block: usize,
        q: &[f64],
        eps: f64,
    ) -> Result<Vec<f64>>;
    /// Notifies the model that `block` changed from `old` to `new`.
    fn block_replaced(&mut self, _block: usize, _old: &[f64], _new: &[f64]) {}
}

/// A fully specified problem instance.
#[derive(Clone)]
pub struct ProblemSpec {
    layout: Arc<BlockLayout>,
    cone: Cone,
    smooth: Smooth,
    smooth_lipschitz: f64,
    regularizers: Vec<Regularizer>,
    constraints: Vec<ConstraintBlock>,
    constraint_offset: Vec<f64>,
    constraint_lipschitz: f64,
    feasible: Vec<FeasibleSet>,
    core: CoreFunction,
    block_solver: Option<Arc<dyn BlockSubproblemSolver>>,
    /// Subgradient growth constants `(c₁, c₂)` of `J`; informational only.
    growth_constants: Option<(f64, f64)>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("n", &self.layout.total())
            .field("blocks", &self.layout.n_blocks())
            .field("cone", &self.cone)
            .field("smooth", &self.smooth)
            .field("smooth_lipschitz", &self.smooth_lipschitz)
            .field("constraint_lipschitz", &self.constraint_lipschitz)
            .field("core", &self.core)
            .finish_non_exhaustive()
    }
}

/// Builder for [`ProblemSpec`]. Unset terms default to zero, `Uᵢ` to the whole space
/// and the core function to `½‖·‖²`.
pub struct ProblemBuilder {
    spec: ProblemSpec,
}

impl ProblemBuilder {
    pub fn smooth(mut self, smooth: Smooth, lipschitz: f64) -> Self {
        self.spec.smooth = smooth;
        self.spec.smooth_lipschitz = lipschitz;
        self
    }

    pub fn regularizer(mut self, block: usize, j: Regularizer) -> Self {
        self.spec.regularizers[block] = j;
        self
    }

    pub fn regularizers(mut self, js: Vec<Regularizer>) -> Self {
        self.spec.regularizers = js;
        self
    }

    pub fn constraint(mut self, block: usize, theta: ConstraintBlock) -> Self {
        self.spec.constraints[block] = theta;
        self
    }

    pub fn constraints(mut self, thetas: Vec<ConstraintBlock>) -> Self {
        self.spec.constraints = thetas;
        self
    }

    /// Constant added to `Σ Θᵢ(uᵢ)`.
    pub fn constraint_offset(mut self, offset: Vec<f64>) -> Self {
        self.spec.constraint_offset = offset;
        self
    }

    pub fn constraint_lipschitz(mut self, tau: f64) -> Self {
        self.spec.constraint_lipschitz = tau;
        self
    }

    pub fn feasible_set(mut self, block: usize, set: FeasibleSet) -> Self {
        self.spec.feasible[block] = set;
        self
    }

    pub fn core(mut self, core: CoreFunction) -> Self {
        self.spec.core = core;
        self
    }

    pub fn block_solver(mut self, solver: Arc<dyn BlockSubproblemSolver>) -> Self {
        self.spec.block_solver = Some(solver);
        self
    }

    pub fn growth_constants(mut self, c1: f64, c2: f64) -> Self {
        self.spec.growth_constants = Some((c1, c2));
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let s = self.spec;
        let n_blocks = s.layout.n_blocks();
        let m = s.cone.dim();
        check_len(n_blocks, s.regularizers.len())?;
        check_len(n_blocks, s.constraints.len())?;
        check_len(n_blocks, s.feasible.len())?;
        check_len(m, s.constraint_offset.len())?;
        for (i, c) in s.constraints.iter().enumerate() {
            match c {
                ConstraintBlock::Linear(mat) => {
                    if mat.dim() != (m, s.layout.block_len(i)) {
                        return Err(Error::InvalidArgument(format!(
                            "block {i}: linear map has shape {:?}, expected ({m}, {})",
                            mat.dim(),
                            s.layout.block_len(i)
                        )));
                    }
                }
                ConstraintBlock::ElasticNet { lambda } => {
                    if m != 1 || !(0.0..=1.0).contains(lambda) {
                        return Err(Error::InvalidArgument(
                            "elastic-net constraint needs a scalar cone and lambda in [0, 1]"
                                .into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        for (i, set) in s.feasible.iter().enumerate() {
            if let FeasibleSet::Box { lower, upper } = set {
                check_len(s.layout.block_len(i), lower.len())?;
                check_len(s.layout.block_len(i), upper.len())?;
                if lower.iter().zip(upper).any(|(l, h)| l > h) {
                    return Err(Error::InvalidArgument(format!("block {i}: empty box")));
                }
            }
        }
        match &s.smooth {
            Smooth::ShiftedQuadratic { center } => check_len(s.layout.total(), center.len())?,
            Smooth::LeastSquares { a, b } => {
                check_len(s.layout.total(), a.ncols())?;
                check_len(a.nrows(), b.len())?;
            }
            _ => {}
        }
        if !(s.smooth_lipschitz >= 0.0) || !(s.constraint_lipschitz >= 0.0) {
            return Err(Error::InvalidArgument(
                "Lipschitz constants must be nonnegative".into(),
            ));
        }
        Ok(s)
    }
}

impl ProblemSpec {
    pub fn builder(layout: BlockLayout, cone: Cone) -> ProblemBuilder {
        let n_blocks = layout.n_blocks();
        let m = cone.dim();
        ProblemBuilder {
            spec: ProblemSpec {
                layout: Arc::new(layout),
                cone,
                smooth: Smooth::Zero,
                smooth_lipschitz: 0.0,
                regularizers: vec![Regularizer::Zero; n_blocks],
                constraints: vec![ConstraintBlock::Zero; n_blocks],
                constraint_offset: vec![0.0; m],
                constraint_lipschitz: 0.0,
                feasible: vec![FeasibleSet::Whole; n_blocks],
                core: CoreFunction::HalfSquaredNorm,
                block_solver: None,
                growth_constants: None,
            },
        }
    }

    pub fn smooth(&self) -> &Smooth {
        &self.smooth
    }

    pub fn regularizers(&self) -> &[Regularizer] {
        &self.regularizers
    }

    pub fn constraints(&self) -> &[ConstraintBlock] {
        &self.constraints
    }

    pub fn constraint_offset(&self) -> &[f64] {
        &self.constraint_offset
    }

    pub fn growth_constants(&self) -> Option<(f64, f64)> {
        self.growth_constants
    }

    fn check(&self, u: &BlockVector) -> Result<()> {
        if **u.layout() != *self.layout {
            return Err(Error::InvalidArgument(
                "point does not match the problem's block layout".into(),
            ));
        }
        Ok(())
    }

    /// `Θᵢ(uᵢ)`, without the constant offset.
    pub fn theta_block(&self, block: usize, x: &[f64]) -> Vec<f64> {
        self.constraints[block].value(x, self.cone.dim())
    }

    /// `Θ(u) = offset + Σᵢ Θᵢ(uᵢ)`.
    pub fn theta_value(&self, u: &BlockVector) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(self.theta_unchecked(u))
    }

    fn theta_unchecked(&self, u: &BlockVector) -> Vec<f64> {
        let mut out = self.constraint_offset.clone();
        for i in 0..self.layout.n_blocks() {
            for (o, v) in out.iter_mut().zip(self.theta_block(i, u.block(i))) {
                *o += v;
            }
        }
        out
    }

    /// `J(u) = Σᵢ Jᵢ(uᵢ)`.
    pub fn j_value(&self, u: &BlockVector) -> Result<f64> {
        self.check(u)?;
        Ok(self.j_unchecked(u))
    }

    fn j_unchecked(&self, u: &BlockVector) -> f64 {
        self.regularizers
            .iter()
            .enumerate()
            .map(|(i, j)| j.value(u.block(i)))
            .sum()
    }

    pub fn g_value(&self, u: &BlockVector) -> Result<f64> {
        self.check(u)?;
        Ok(self.smooth.value(u.as_slice()))
    }

    pub fn g_gradient(&self, u: &BlockVector) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(self.smooth.gradient(u.as_slice()))
    }

    /// `∇_{block} G(u)`
    pub fn g_block_gradient(&self, u: &BlockVector, block: usize) -> Vec<f64> {
        self.smooth
            .block_gradient(u.as_slice(), self.layout.range(block))
    }

    pub fn max_step_bound(&self, gamma: f64) -> Result<f64> {
        max_step_bound(&self.step_constants(), gamma)
    }
}

pub fn theta_value(spec: &ProblemSpec, u: &BlockVector) -> Result<Vec<f64>> {
    spec.theta_value(u)
}

impl BlockModel for ProblemSpec {
    fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    fn cone(&self) -> &Cone {
        &self.cone
    }

    fn core(&self) -> &CoreFunction {
        &self.core
    }

    fn step_constants(&self) -> StepConstants {
        StepConstants {
            n_blocks: self.layout.n_blocks(),
            beta: self.core.beta(),
            smooth_lipschitz: self.smooth_lipschitz,
            constraint_lipschitz: self.constraint_lipschitz,
        }
    }

    fn objective(&self, u: &BlockVector) -> f64 {
        self.smooth.value(u.as_slice()) + self.j_unchecked(u)
    }

    fn constraint_value(&self, u: &BlockVector) -> Vec<f64> {
        self.theta_unchecked(u)
    }

    fn project_feasible(&self, u: &mut BlockVector) {
        for (i, set) in self.feasible.iter().enumerate() {
            set.project(u.block_mut(i));
        }
    }

    fn solve_block(
        &mut self,
        u: &BlockVector,
        block: usize,
        q: &[f64],
        eps: f64,
    ) -> Result<Vec<f64>> {
        let grad = self.g_block_gradient(u, block);
        let current = u.block(block);
        if let Some(solver) = &self.block_solver {
            return Ok(solver.solve(block, &grad, q, eps, current));
        }
        if !matches!(self.core, CoreFunction::HalfSquaredNorm) {
            return Err(Error::UnsupportedSubproblem {
                block,
                reason: "a custom core function needs a user-supplied block solver".into(),
            });
        }
        // Gradient step on the linearized smooth part, then the block prox.
        let mut v: Vec<f64> = current
            .iter()
            .zip(&grad)
            .map(|(x, g)| x - eps * g)
            .collect();
        let j = &self.regularizers[block];
        let mut x = match &self.constraints[block] {
            ConstraintBlock::Zero => j.prox(&v, eps),
            ConstraintBlock::Linear(mat) => {
                let shift = mat.t().dot(&ArrayView1::from(q));
                for (vi, s) in v.iter_mut().zip(shift.iter()) {
                    *vi -= eps * s;
                }
                j.prox(&v, eps)
            }
            ConstraintBlock::ElasticNet { lambda } if j.is_zero() => {
                if q[0] < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "multiplier estimate must be >= 0, got {}",
                        q[0]
                    )));
                }
                elastic_net_linearized_prox(*lambda, q[0], eps, &v)
            }
            ConstraintBlock::Custom(c) if j.is_zero() => {
                c.linearized_prox(q, eps, &v)
                    .ok_or_else(|| Error::UnsupportedSubproblem {
                        block,
                        reason: "nonlinear constraint block has no closed-form prox".into(),
                    })?
            }
            _ => {
                return Err(Error::UnsupportedSubproblem {
                    block,
                    reason: "nonlinear constraint combined with a nonzero regularizer".into(),
                })
            }
        };
        self.feasible[block].project(&mut x);
        Ok(x)
    }
}
