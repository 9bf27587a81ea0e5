//! Runs a resolved [`ExperimentPlan`]: one solver run per (block count, seed), each
//! writing its own files, then the across-seed mean traces.

use std::path::{Path, PathBuf};
use std::time::Instant;

use conecoord_core::auglag::{dual_bound_orthant, dual_bound_soc};
use conecoord_core::diagnostics::{
    fit_rate, kkt_report, QualityReport, RateFit, RateMetric, ReportOptions,
};
use conecoord_core::instances::{gen_ensvm, EnsvmInstance, SocSaddle, SyntheticSaddle};
use conecoord_core::model::max_step_bound;
use conecoord_core::solver::{AverageStart, IterationRecord, IterationTrace, TracePoint};
use conecoord_core::{
    run_appal, run_spdc, AugLagParams, BlockModel, DualBall, SaddlePoint, SolverConfig,
    StepSchedule,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    read_instance, Algorithm, AverageFrom, ExperimentPlan, Format, InstanceSpec, MuMode,
    ScheduleSpec, StepSize, TraceOf,
};
use crate::error::{CliError, CliResult};
use crate::trace_io::{mean_records, write_trace};

/// Burn-in fraction dropped before rate fits.
pub const FIT_BURN_IN: f64 = 0.1;

#[derive(Debug, Clone, Default, Serialize)]
pub struct RateFits {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suboptimality: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<RateFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub blocks: usize,
    pub seed: u64,
    pub instance_seed: Option<u64>,
    pub gamma: f64,
    /// `None` for an unbounded ball.
    pub mu: Option<f64>,
    pub step_bound: f64,
    pub first_step: f64,
    pub iterations: u64,
    pub stopped_early: bool,
    /// Report at the traced point (averaged or last). `suboptimality` is the raw objective when
    /// `suboptimality_is_raw` is set.
    pub report: QualityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_fit: Option<RateFits>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanSummary {
    pub blocks: usize,
    pub seeds: Vec<u64>,
    pub records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_fit: Option<RateFits>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: IterationTrace,
}

pub fn block_dir(plan: &ExperimentPlan, blocks: usize) -> PathBuf {
    plan.output_dir.join(format!("blocks-{blocks}"))
}

pub fn trace_path(plan: &ExperimentPlan, blocks: usize, seed: u64) -> PathBuf {
    block_dir(plan, blocks).join(format!("trace-seed-{seed}.csv"))
}

pub fn summary_path(plan: &ExperimentPlan, blocks: usize, seed: u64) -> PathBuf {
    block_dir(plan, blocks).join(format!("summary-seed-{seed}.json"))
}

/// Thread count from `CONECOORD_THREADS`, if set.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var("CONECOORD_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "CONECOORD_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn run_experiment(plan: &ExperimentPlan, threads: Option<usize>) -> CliResult<Vec<RunSummary>> {
    for &b in &plan.blocks {
        let dir = block_dir(plan, b);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    }
    write_json(plan, &plan.output_dir.join("plan.json"))?;

    let jobs: Vec<(usize, u64)> = plan
        .blocks
        .iter()
        .flat_map(|&b| plan.seeds.iter().map(move |&s| (b, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let results: Vec<CliResult<RunOutput>> =
        pool.install(|| jobs.par_iter().map(|&(b, s)| run_one(plan, b, s)).collect());
    let outputs: Vec<RunOutput> = results.into_iter().collect::<CliResult<_>>()?;

    for &b in &plan.blocks {
        let group: Vec<&RunOutput> = outputs.iter().filter(|o| o.summary.blocks == b).collect();
        let runs: Vec<&[IterationRecord]> =
            group.iter().map(|o| o.trace.records.as_slice()).collect();
        let mean = mean_records(&runs);
        let dir = block_dir(plan, b);
        if plan.writes(Format::Csv) {
            write_trace(&mean, &dir.join("mean-trace.csv"))?;
        }
        if plan.writes(Format::Json) {
            let traces: Vec<&IterationTrace> = group.iter().map(|o| &o.trace).collect();
            let summary = MeanSummary {
                blocks: b,
                seeds: plan.seeds.clone(),
                records: mean.len(),
                rate_fit: rate_fits(plan, &traces),
            };
            write_json(&summary, &dir.join("mean-summary.json"))?;
        }
    }
    Ok(outputs.into_iter().map(|o| o.summary).collect())
}

/// Fits over traces spanning at least two decades of iterations, for power-law
/// schedules only (the target exponent depends on `α`).
fn rate_fits(plan: &ExperimentPlan, traces: &[&IterationTrace]) -> Option<RateFits> {
    let ScheduleSpec::PowerLaw { alpha, .. } = plan.schedule else {
        return None;
    };
    let common = traces.iter().map(|t| t.records.len()).min()?;
    // Truncate to aligned records so early-stopped runs still fit.
    let trimmed: Vec<IterationTrace> = traces
        .iter()
        .map(|t| IterationTrace {
            thinning: t.thinning,
            records: t.records[..common].to_vec(),
            history: None,
        })
        .collect();
    let first = trimmed[0].records.iter().find(|r| r.k > 0)?.k;
    let last = trimmed[0].records.last()?.k;
    if (last as f64) < 100.0 * first as f64 {
        return None;
    }
    let refs: Vec<&IterationTrace> = trimmed.iter().collect();
    let has_sub = refs
        .iter()
        .all(|t| t.records.iter().all(|r| r.suboptimality.is_some()));
    let fits = RateFits {
        suboptimality: if has_sub {
            fit_rate(&refs, RateMetric::Suboptimality, alpha, FIT_BURN_IN).ok()
        } else {
            None
        },
        feasibility: fit_rate(&refs, RateMetric::Feasibility, alpha, FIT_BURN_IN).ok(),
    };
    if fits.suboptimality.is_none() && fits.feasibility.is_none() {
        None
    } else {
        Some(fits)
    }
}

struct Prepared {
    reference: SaddlePoint,
    optimal_value: f64,
    /// Automatic bound for the instance's own cone.
    auto_mu: f64,
}

fn run_one(plan: &ExperimentPlan, blocks: usize, seed: u64) -> CliResult<RunOutput> {
    let started = Instant::now();
    match &plan.instance {
        InstanceSpec::Ensvm {
            m,
            n,
            s,
            lambda,
            seed: fixed,
            ..
        } => {
            let inst =
                gen_ensvm(*m, *n, *s, *lambda, fixed.unwrap_or(seed))?.with_blocks(blocks)?;
            let instance_seed = Some(inst.seed);
            run_ensvm(plan, &inst, seed, instance_seed, started)
        }
        InstanceSpec::File { path } => {
            let inst = read_instance(path)?.with_blocks(blocks)?;
            let instance_seed = Some(inst.seed);
            run_ensvm(plan, &inst, seed, instance_seed, started)
        }
        InstanceSpec::Synthetic { dim, seed: fixed } => {
            let inst_seed = fixed.unwrap_or(seed);
            let s = SyntheticSaddle::generate(*dim, inst_seed)?;
            let mut spec = s.problem_spec(blocks)?;
            let input = s.slater_input();
            let prepared = Prepared {
                reference: s.saddle_point(spec.layout().clone())?,
                optimal_value: s.optimal_value(),
                auto_mu: dual_bound_orthant(&input, s.objective(&input.slater_point))?,
            };
            execute(plan, &mut spec, prepared, seed, Some(inst_seed), started)
        }
        InstanceSpec::Soc { dim, seed: fixed } => {
            let inst_seed = fixed.unwrap_or(seed);
            let s = SocSaddle::generate(*dim, inst_seed)?;
            let mut spec = s.problem_spec(blocks)?;
            let input = s.slater_input();
            let prepared = Prepared {
                reference: s.saddle_point(spec.layout().clone())?,
                optimal_value: s.optimal_value(),
                auto_mu: dual_bound_soc(&input, s.objective(&input.slater_point))?,
            };
            execute(plan, &mut spec, prepared, seed, Some(inst_seed), started)
        }
    }
}

fn run_ensvm(
    plan: &ExperimentPlan,
    inst: &EnsvmInstance,
    seed: u64,
    instance_seed: Option<u64>,
    started: Instant,
) -> CliResult<RunOutput> {
    let prepared = Prepared {
        reference: inst.saddle_point(),
        optimal_value: 0.0,
        auto_mu: inst.dual_bound(),
    };
    execute(
        plan,
        &mut inst.fast_model(),
        prepared,
        seed,
        instance_seed,
        started,
    )
}

/// Step bound for the chosen method; the full-update method uses `N = 1`.
pub fn method_step_bound<M: BlockModel + ?Sized>(
    model: &M,
    algorithm: Algorithm,
    gamma: f64,
) -> CliResult<f64> {
    let mut c = model.step_constants();
    if algorithm == Algorithm::Appal {
        c.n_blocks = 1;
    }
    Ok(max_step_bound(&c, gamma)?)
}

pub fn build_schedule(
    spec: &ScheduleSpec,
    bound: f64,
    allow_unsafe: bool,
) -> CliResult<StepSchedule> {
    let cap = if allow_unsafe { f64::INFINITY } else { bound };
    let absolute = |size: &StepSize| -> CliResult<f64> {
        match *size {
            StepSize::Scale(s) => Ok(s),
            StepSize::Fraction(f) if bound.is_finite() => Ok(f * bound),
            StepSize::Fraction(_) => Err(CliError::Config(
                "solver.schedule: the step bound is unbounded, give an absolute scale".into(),
            )),
        }
    };
    Ok(match spec {
        ScheduleSpec::PowerLaw {
            alpha,
            offset,
            size,
        } => {
            // a fraction fixes the first step, so the numerator absorbs offset^α
            let scale = match size {
                StepSize::Scale(s) => *s,
                StepSize::Fraction(_) => absolute(size)? * offset.powf(*alpha),
            };
            StepSchedule::power_law(*alpha, scale, *offset, cap)?
        }
        ScheduleSpec::Constant { size } => StepSchedule::constant(absolute(size)?, cap)?,
        ScheduleSpec::Explicit { steps } => StepSchedule::explicit(steps.clone(), cap)?,
    })
}

fn execute<M: BlockModel + ?Sized>(
    plan: &ExperimentPlan,
    model: &mut M,
    prepared: Prepared,
    seed: u64,
    instance_seed: Option<u64>,
    started: Instant,
) -> CliResult<RunOutput> {
    let blocks = model.layout().n_blocks();
    let ball = match plan.mu {
        MuMode::AutoOrthant | MuMode::AutoSoc => DualBall::new(prepared.auto_mu)?,
        MuMode::Explicit(v) => DualBall::new(v)?,
        MuMode::Infinite => DualBall::unbounded(),
    };
    let params = AugLagParams::new(plan.gamma, model.cone().clone(), ball)?;
    let bound = method_step_bound(model, plan.algorithm, plan.gamma)?;
    let schedule = build_schedule(&plan.schedule, bound, plan.allow_unsafe_step)?;
    let config = SolverConfig {
        iterations: plan.iterations,
        seed,
        thinning: plan.thinning,
        average_start: match plan.average_from {
            AverageFrom::Initial => AverageStart::Initial,
            AverageFrom::FirstIterate => AverageStart::FirstIterate,
        },
        trace_point: match plan.trace {
            TraceOf::Average => TracePoint::Average,
            TraceOf::Current => TracePoint::Current,
        },
        reference: Some(prepared.reference.clone()),
        optimal_value: Some(prepared.optimal_value),
        stop: plan.stop.map(|s| conecoord_core::solver::StopRule {
            feasibility: s.feasibility,
            stationarity: s.stationarity,
            patience: s.patience,
        }),
        allow_unsafe_step: plan.allow_unsafe_step,
        ..Default::default()
    };
    let out = match plan.algorithm {
        Algorithm::Spdc => run_spdc(model, &params, &schedule, &config)?,
        Algorithm::Appal => run_appal(model, &params, &schedule, &config)?,
    };
    let options = ReportOptions {
        reference: Some(&prepared.reference),
        optimal_value: Some(prepared.optimal_value),
        lyapunov_eps: Some(schedule.at(out.iterations)),
    };
    let (u, p) = match plan.trace {
        TraceOf::Average => (&out.average_u, &out.average_p),
        TraceOf::Current => (&out.last_u, &out.last_p),
    };
    let report = kkt_report(model, &params, u, p, &options)?;
    let summary = RunSummary {
        algorithm: plan.algorithm,
        blocks,
        seed,
        instance_seed,
        gamma: plan.gamma,
        mu: params
            .ball
            .radius()
            .is_finite()
            .then(|| params.ball.radius()),
        step_bound: bound,
        first_step: schedule.first(),
        iterations: out.iterations,
        stopped_early: out.stopped_early,
        report,
        rate_fit: rate_fits(plan, &[&out.trace]),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    if plan.writes(Format::Csv) {
        write_trace(&out.trace.records, &trace_path(plan, blocks, seed))?;
    }
    if plan.writes(Format::Json) {
        write_json(&summary, &summary_path(plan, blocks, seed))?;
    }
    Ok(RunOutput {
        summary,
        trace: out.trace,
    })
}
