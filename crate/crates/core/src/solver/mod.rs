//! Primal-dual iterations.
//!
//! * [`run_spdc`]: at step `k` draw a block `i(k)` uniformly, solve the linearized
//!   block subproblem with multiplier estimate `qᵏ = Π(pᵏ + γΘ(uᵏ))`, then set
//!   `pᵏ⁺¹ = P_μ(Π(pᵏ + γΘ(uᵏ⁺¹)))`.
//! * [`run_appal`]: the deterministic method that updates every block from the same
//!   `uᵏ` and skips the ball projection.
//!
//! Both keep the step-weighted ergodic averages `Σ εᵏuᵏ / Σ εᵏ` and `Σ εᵏpᵏ / Σ εᵏ`.

mod schedule;
mod trace;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use schedule::{ScheduleKind, StepSchedule};
pub use trace::{History, IterationRecord, IterationTrace};

use crate::auglag::AugLagParams;
use crate::diagnostics::{lyapunov, stationarity_residual, stationarity_step};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dist, norm};
use crate::model::{max_step_bound, BlockModel, BlockVector, SaddlePoint, StepConstants};
use crate::rng::Rng;
use crate::tolerances::DUAL_FEASIBILITY;

/// Which iterates enter the ergodic average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AverageStart {
    /// `ū_t = Σ_{k=0}^t εᵏuᵏ / Σ_{k=0}^t εᵏ`, including the starting point.
    #[default]
    Initial,
    /// Skip `u⁰` and average from `u¹`.
    FirstIterate,
}

/// Which point the trace metrics are evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TracePoint {
    #[default]
    Average,
    Current,
}

/// Early stop once feasibility and the stationarity residual of the traced point
/// stay below their tolerances for `patience` consecutive records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub feasibility: f64,
    pub stationarity: f64,
    pub patience: usize,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub iterations: u64,
    pub seed: u64,
    /// Record every `thinning`-th iterate plus the final one; `0` disables tracing.
    pub thinning: u64,
    pub average_start: AverageStart,
    pub trace_point: TracePoint,
    /// `u⁰`; zero when absent. Projected onto `U`.
    pub initial_u: Option<Vec<f64>>,
    /// `p⁰ ∈ C* ∩ 𝔅_μ`; zero when absent.
    pub initial_p: Option<Vec<f64>>,
    /// Known saddle point, enables the Lyapunov column.
    pub reference: Option<SaddlePoint>,
    /// Known optimal value, enables the suboptimality column.
    pub optimal_value: Option<f64>,
    pub stop: Option<StopRule>,
    pub keep_history: bool,
    /// Keep every `history_every`-th iterate (and the final one) when `keep_history` is set.
    pub history_every: u64,
    /// Run even if the first step violates the step bound.
    pub allow_unsafe_step: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            seed: 0,
            thinning: 1,
            average_start: AverageStart::Initial,
            trace_point: TracePoint::Average,
            initial_u: None,
            initial_p: None,
            reference: None,
            optimal_value: None,
            stop: None,
            keep_history: false,
            history_every: 1,
            allow_unsafe_step: false,
        }
    }
}

/// Mutable state of a run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: BlockVector,
    pub p: Vec<f64>,
    pub k: u64,
    /// `Θ(uᵏ)`
    pub theta: Vec<f64>,
    avg_num: Vec<f64>,
    avg_p_num: Vec<f64>,
    avg_den: f64,
    n_blocks: usize,
    rng: Rng,
}

impl SolverState {
    /// Starts from `u` (projected onto `U`) and `p`, checking `p ∈ C* ∩ 𝔅_μ`.
    pub fn new<M: BlockModel + ?Sized>(
        model: &M,
        params: &AugLagParams,
        u: Vec<f64>,
        p: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let mut u = BlockVector::from_flat(model.layout().clone(), u)?;
        model.project_feasible(&mut u);
        check_len(model.cone().dim(), p.len())?;
        if !params.cone.dual_contains(&p, DUAL_FEASIBILITY) {
            return Err(Error::Config(
                "initial multiplier is not in the dual cone".into(),
            ));
        }
        if norm(&p) > params.ball.radius() + DUAL_FEASIBILITY {
            return Err(Error::Config(
                "initial multiplier lies outside the dual ball".into(),
            ));
        }
        let theta = model.constraint_value(&u);
        Ok(Self {
            avg_num: vec![0.0; u.len()],
            avg_p_num: vec![0.0; p.len()],
            avg_den: 0.0,
            n_blocks: model.layout().n_blocks(),
            rng: Rng::seed_with_stream(seed, SOLVER_STREAM),
            theta,
            u,
            p,
            k: 0,
        })
    }

    fn accumulate(&mut self, eps: f64) {
        axpy(eps, self.u.as_slice(), &mut self.avg_num);
        axpy(eps, &self.p, &mut self.avg_p_num);
        self.avg_den += eps;
    }

    /// Step-weighted average of the primal iterates seen so far.
    pub fn average_u(&self) -> BlockVector {
        if self.avg_den > 0.0 {
            let data = self.avg_num.iter().map(|x| x / self.avg_den).collect();
            BlockVector::from_flat(self.u.layout().clone(), data).unwrap()
        } else {
            self.u.clone()
        }
    }

    pub fn average_p(&self) -> Vec<f64> {
        if self.avg_den > 0.0 {
            self.avg_p_num.iter().map(|x| x / self.avg_den).collect()
        } else {
            self.p.clone()
        }
    }

    pub fn average_weight(&self) -> f64 {
        self.avg_den
    }
}

const SOLVER_STREAM: u64 = 0x5EED_B10C;

/// Uniform block index in `0..N`.
pub fn draw_block(state: &mut SolverState) -> usize {
    state.rng.below(state.n_blocks as u64) as usize
}

/// `uᵏ⁺¹`: `uᵏ` with `block` replaced by the solution of its linearized subproblem.
pub fn spdc_block_update<M: BlockModel + ?Sized>(
    model: &mut M,
    params: &AugLagParams,
    state: &SolverState,
    block: usize,
    eps: f64,
) -> Result<BlockVector> {
    let q = params.multiplier_estimate(&state.theta, &state.p)?;
    model.prepare(&state.u);
    let x = model.solve_block(&state.u, block, &q, eps)?;
    let mut next = state.u.clone();
    next.set_block(block, &x)?;
    Ok(next)
}

/// `pᵏ⁺¹ = P_μ(Π(pᵏ + γΘ(uᵏ⁺¹)))`, given `theta_next = Θ(uᵏ⁺¹)`.
pub fn spdc_dual_update(params: &AugLagParams, p: &[f64], theta_next: &[f64]) -> Result<Vec<f64>> {
    let half = params.multiplier_estimate(theta_next, p)?;
    Ok(params.ball.project(&half))
}

/// Output of a run.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Ergodic average `ū_t`.
    pub average_u: BlockVector,
    /// Ergodic average `p̄_t`.
    pub average_p: Vec<f64>,
    pub last_u: BlockVector,
    pub last_p: Vec<f64>,
    pub iterations: u64,
    pub stopped_early: bool,
    pub trace: IterationTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Spdc,
    Appal,
}

pub fn run_spdc<M: BlockModel + ?Sized>(
    model: &mut M,
    params: &AugLagParams,
    schedule: &StepSchedule,
    config: &SolverConfig,
) -> Result<SolveOutput> {
    run(model, params, schedule, config, Method::Spdc)
}

/// Deterministic full update. The step bound is checked with `N = 1`, since every
/// block moves at once. The multiplier is not clipped to the ball.
pub fn run_appal<M: BlockModel + ?Sized>(
    model: &mut M,
    params: &AugLagParams,
    schedule: &StepSchedule,
    config: &SolverConfig,
) -> Result<SolveOutput> {
    run(model, params, schedule, config, Method::Appal)
}

fn step_bound<M: BlockModel + ?Sized>(model: &M, gamma: f64, method: Method) -> Result<f64> {
    let mut c: StepConstants = model.step_constants();
    if method == Method::Appal {
        c.n_blocks = 1;
    }
    max_step_bound(&c, gamma)
}

fn run<M: BlockModel + ?Sized>(
    model: &mut M,
    params: &AugLagParams,
    schedule: &StepSchedule,
    config: &SolverConfig,
    method: Method,
) -> Result<SolveOutput> {
    if model.cone() != &params.cone {
        return Err(Error::Config(
            "augmented-Lagrangian cone differs from the problem cone".into(),
        ));
    }
    if !schedule.covers(config.iterations) {
        return Err(Error::Config(format!(
            "explicit schedule is shorter than {} iterations plus the final step",
            config.iterations
        )));
    }
    let bound = step_bound(model, params.gamma, method)?;
    if !(schedule.first() < bound) && !config.allow_unsafe_step {
        return Err(Error::Config(format!(
            "first step {} violates the step bound {bound}",
            schedule.first()
        )));
    }
    let n = model.layout().total();
    let m = model.cone().dim();
    let u0 = match &config.initial_u {
        Some(u) => {
            check_len(n, u.len())?;
            u.clone()
        }
        None => vec![0.0; n],
    };
    let p0 = config.initial_p.clone().unwrap_or_else(|| vec![0.0; m]);
    let mut run_params = params.clone();
    if method == Method::Appal {
        run_params.ball = crate::cones::DualBall::unbounded();
    }
    let params = &run_params;
    let mut state = SolverState::new(model, params, u0, p0, config.seed)?;
    if let Some(reference) = &config.reference {
        check_len(n, reference.u.len())?;
        check_len(m, reference.p.len())?;
    }
    let reference_value = config
        .optimal_value
        .or_else(|| config.reference.as_ref().map(|r| model.objective(&r.u)));
    let eps_probe = match config.stop {
        Some(_) => stationarity_step(model, params.gamma)?,
        None => 0.0,
    };

    model.prepare(&state.u);
    let n_blocks = model.layout().n_blocks();
    let start = Instant::now();
    let mut trace = IterationTrace {
        thinning: config.thinning,
        records: Vec::new(),
        history: config.keep_history.then(History::default),
    };
    let mut calm_records = 0usize;
    let mut stopped_early = false;

    while state.k < config.iterations {
        let k = state.k;
        let eps = schedule.at(k);
        if k > 0 || config.average_start == AverageStart::Initial {
            state.accumulate(eps);
        }
        if let Some(h) = trace.history.as_mut() {
            if k % config.history_every.max(1) == 0 {
                h.ks.push(k);
                h.iterates.push(state.u.as_slice().to_vec());
                h.duals.push(state.p.clone());
                h.steps.push(eps);
            }
        }
        let block = match method {
            Method::Spdc => Some(draw_block(&mut state)),
            Method::Appal => None,
        };
        let q = params.multiplier_estimate(&state.theta, &state.p)?;

        if config.thinning > 0 && k % config.thinning == 0 {
            let rec = record(
                model,
                params,
                &state,
                config,
                reference_value,
                k,
                block,
                eps,
                &q,
                &start,
            )?;
            trace.records.push(rec);
            if let Some(rule) = config.stop {
                let (point, point_p) = traced_point(&state, config.trace_point);
                let feas = trace.records.last().unwrap().feasibility;
                let stat = stationarity_residual(model, params, &point, &point_p, eps_probe)?;
                model.prepare(&state.u);
                if feas <= rule.feasibility && stat <= rule.stationarity {
                    calm_records += 1;
                } else {
                    calm_records = 0;
                }
                if calm_records >= rule.patience.max(1) {
                    stopped_early = true;
                }
            }
        }
        if stopped_early {
            break;
        }

        match block {
            Some(i) => {
                let x = model.solve_block(&state.u, i, &q, eps)?;
                let old = state.u.block(i).to_vec();
                state.u.set_block(i, &x)?;
                model.block_replaced(i, &old, &x);
            }
            None => {
                let mut blocks = Vec::with_capacity(n_blocks);
                for i in 0..n_blocks {
                    blocks.push(model.solve_block(&state.u, i, &q, eps)?);
                }
                for (i, x) in blocks.iter().enumerate() {
                    let old = state.u.block(i).to_vec();
                    state.u.set_block(i, x)?;
                    model.block_replaced(i, &old, x);
                }
            }
        }
        state.theta = model.constraint_value(&state.u);
        state.p = spdc_dual_update(params, &state.p, &state.theta)?;
        state.k += 1;
    }

    // Final iterate; an early stop already accumulated and recorded row k.
    let k = state.k;
    let eps = schedule.at(k);
    if !stopped_early {
        if k > 0 || config.average_start == AverageStart::Initial {
            state.accumulate(eps);
        }
        if let Some(h) = trace.history.as_mut() {
            h.ks.push(k);
            h.iterates.push(state.u.as_slice().to_vec());
            h.duals.push(state.p.clone());
            h.steps.push(eps);
        }
        if config.thinning > 0 {
            let q = params.multiplier_estimate(&state.theta, &state.p)?;
            let rec = record(
                model,
                params,
                &state,
                config,
                reference_value,
                k,
                None,
                eps,
                &q,
                &start,
            )?;
            trace.records.push(rec);
        }
    }

    Ok(SolveOutput {
        average_u: state.average_u(),
        average_p: state.average_p(),
        last_u: state.u,
        last_p: state.p,
        iterations: k,
        stopped_early,
        trace,
    })
}

fn traced_point(state: &SolverState, which: TracePoint) -> (BlockVector, Vec<f64>) {
    match which {
        TracePoint::Average => (state.average_u(), state.average_p()),
        TracePoint::Current => (state.u.clone(), state.p.clone()),
    }
}

#[allow(clippy::too_many_arguments)]
fn record<M: BlockModel + ?Sized>(
    model: &M,
    params: &AugLagParams,
    state: &SolverState,
    config: &SolverConfig,
    reference_value: Option<f64>,
    k: u64,
    block: Option<usize>,
    eps: f64,
    q: &[f64],
    start: &Instant,
) -> Result<IterationRecord> {
    let (point, _) = traced_point(state, config.trace_point);
    let objective = model.objective(&point);
    let theta = model.constraint_value(&point);
    let feasibility = norm(&params.cone.project_dual(&theta)?);
    let lyap = match &config.reference {
        Some(r) => Some(lyapunov(model, params, &state.u, &state.p, r, eps)?),
        None => None,
    };
    Ok(IterationRecord {
        k,
        block,
        eps,
        objective,
        suboptimality: reference_value.map(|v| (objective - v).abs()),
        feasibility,
        dual_residual: dist(q, &state.p),
        lyapunov: lyap,
        wall_ns: start.elapsed().as_nanos() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{Cone, DualBall};
    use crate::model::{BlockLayout, ConstraintBlock, ProblemSpec, Smooth};
    use ndarray::Array2;
    use std::sync::Arc;

    fn params(gamma: f64, mu: f64) -> AugLagParams {
        AugLagParams::new(gamma, Cone::orthant(1).unwrap(), DualBall::new(mu).unwrap()).unwrap()
    }

    #[test]
    fn dual_update_examples() {
        assert_eq!(
            spdc_dual_update(&params(1.0, 10.0), &[1.0], &[2.0]).unwrap(),
            vec![3.0]
        );
        assert_eq!(
            spdc_dual_update(&params(1.0, 2.0), &[1.0], &[2.0]).unwrap(),
            vec![2.0]
        );
        assert_eq!(
            spdc_dual_update(&params(1.0, 2.0), &[0.0], &[-4.0]).unwrap(),
            vec![0.0]
        );
    }

    fn quadratic_1d() -> ProblemSpec {
        // G = ½u², no J, no Θ.
        ProblemSpec::builder(BlockLayout::equal(1, 1).unwrap(), Cone::orthant(1).unwrap())
            .smooth(Smooth::ShiftedQuadratic { center: vec![0.0] }, 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn block_update_one_dimensional_quadratic() {
        // min ⟨u⁰, u⟩ + (1/2ε)(u − u⁰)² gives u = u⁰(1 − ε) = 0.5.
        let mut spec = quadratic_1d();
        let p = params(1.0, 10.0);
        let state = SolverState::new(&spec, &p, vec![1.0], vec![0.0], 0).unwrap();
        let next = spdc_block_update(&mut spec, &p, &state, 0, 0.5).unwrap();
        assert!((next.as_slice()[0] - 0.5).abs() < 1e-15);
        // grid oracle
        let best = (0..=200_000)
            .map(|i| -1.0 + 3.0 * i as f64 / 200_000.0)
            .min_by(|a, b| {
                let f = |x: f64| x + (x - 1.0).powi(2);
                f(*a).partial_cmp(&f(*b)).unwrap()
            })
            .unwrap();
        assert!((best - 0.5).abs() < 1e-4);
    }

    #[test]
    fn tiny_step_barely_moves() {
        let mut spec = quadratic_1d();
        let p = params(1.0, 10.0);
        let state = SolverState::new(&spec, &p, vec![1.0], vec![0.0], 0).unwrap();
        let next = spdc_block_update(&mut spec, &p, &state, 0, 1e-12).unwrap();
        assert!((next.as_slice()[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn zero_problem_is_stationary() {
        let mut spec =
            ProblemSpec::builder(BlockLayout::equal(4, 2).unwrap(), Cone::orthant(1).unwrap())
                .build()
                .unwrap();
        let p = params(1.0, 5.0);
        let schedule = StepSchedule::power_law(0.6, 0.5, 1.0, f64::INFINITY).unwrap();
        let config = SolverConfig {
            iterations: 50,
            initial_u: Some(vec![1.0, -2.0, 3.0, 0.5]),
            ..Default::default()
        };
        let out = run_spdc(&mut spec, &p, &schedule, &config).unwrap();
        for (a, b) in out.average_u.as_slice().iter().zip([1.0, -2.0, 3.0, 0.5]) {
            assert!((a - b).abs() <= 1e-15);
        }
        let out = run_appal(
            &mut spec,
            &p,
            &StepSchedule::constant(0.5, f64::INFINITY).unwrap(),
            &config,
        )
        .unwrap();
        assert_eq!(out.last_u.as_slice(), &[1.0, -2.0, 3.0, 0.5]);
    }

    fn qp_1d() -> ProblemSpec {
        // min ½u² s.t. 1 − u ≤ 0.
        ProblemSpec::builder(BlockLayout::equal(1, 1).unwrap(), Cone::orthant(1).unwrap())
            .smooth(Smooth::ShiftedQuadratic { center: vec![0.0] }, 1.0)
            .constraint(
                0,
                ConstraintBlock::Linear(Arc::new(Array2::from_elem((1, 1), -1.0))),
            )
            .constraint_offset(vec![1.0])
            .constraint_lipschitz(1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn appal_solves_scalar_qp() {
        let mut spec = qp_1d();
        let p = params(1.0, f64::INFINITY);
        let cap = spec.max_step_bound(1.0).unwrap();
        assert_eq!(cap, 0.5);
        let schedule = StepSchedule::constant(0.4, cap).unwrap();
        let config = SolverConfig {
            iterations: 2000,
            thinning: 0,
            ..Default::default()
        };
        let out = run_appal(&mut spec, &p, &schedule, &config).unwrap();
        assert!(
            (out.last_u.as_slice()[0] - 1.0).abs() < 1e-8,
            "{:?}",
            out.last_u
        );
        assert!((out.last_p[0] - 1.0).abs() < 1e-8, "{:?}", out.last_p);
    }

    #[test]
    fn unsafe_schedule_is_rejected_unless_allowed() {
        let mut spec = qp_1d();
        let p = params(1.0, 10.0);
        let schedule = StepSchedule::constant(0.6, 1.0).unwrap();
        let mut config = SolverConfig {
            iterations: 10,
            ..Default::default()
        };
        assert!(matches!(
            run_spdc(&mut spec, &p, &schedule, &config),
            Err(Error::Config(_))
        ));
        config.allow_unsafe_step = true;
        assert!(run_spdc(&mut spec, &p, &schedule, &config).is_ok());
    }

    #[test]
    fn thinning_keeps_final_row() {
        let mut spec = qp_1d();
        let p = params(1.0, 10.0);
        let schedule = StepSchedule::power_law(0.6, 0.4, 1.0, 0.5).unwrap();
        let config = SolverConfig {
            iterations: 1000,
            thinning: 10,
            ..Default::default()
        };
        let out = run_spdc(&mut spec, &p, &schedule, &config).unwrap();
        assert_eq!(out.trace.len(), 101);
        assert_eq!(out.trace.records[99].k, 990);
        assert_eq!(out.trace.last().unwrap().k, 1000);
        assert_eq!(out.trace.last().unwrap().block, None);
    }

    #[test]
    fn single_block_always_drawn() {
        let spec = qp_1d();
        let p = params(1.0, 10.0);
        let mut state = SolverState::new(&spec, &p, vec![0.0], vec![0.0], 3).unwrap();
        for _ in 0..100 {
            assert_eq!(draw_block(&mut state), 0);
        }
    }

    #[test]
    fn initial_multiplier_must_be_dual_feasible() {
        let spec = qp_1d();
        assert!(SolverState::new(&spec, &params(1.0, 10.0), vec![0.0], vec![-1.0], 0).is_err());
        assert!(SolverState::new(&spec, &params(1.0, 1.0), vec![0.0], vec![2.0], 0).is_err());
    }

    #[test]
    fn early_stop_triggers_on_solved_problem() {
        let mut spec = qp_1d();
        let p = params(1.0, 10.0);
        let schedule = StepSchedule::constant(0.4, 0.5).unwrap();
        let config = SolverConfig {
            iterations: 100_000,
            thinning: 1,
            trace_point: TracePoint::Current,
            initial_u: Some(vec![1.0]),
            initial_p: Some(vec![1.0]),
            stop: Some(StopRule {
                feasibility: 1e-9,
                stationarity: 1e-9,
                patience: 100,
            }),
            ..Default::default()
        };
        let out = run_spdc(&mut spec, &p, &schedule, &config).unwrap();
        assert!(out.stopped_early);
        assert_eq!(out.iterations, 99);
    }
}
