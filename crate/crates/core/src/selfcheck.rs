//! Runtime invariant suite, sized to finish in a few seconds.

use serde::Serialize;

use crate::auglag::{dual_bound_orthant, phi_grad_p, phi_grad_theta, phi_value, AugLagParams};
use crate::cones::{Cone, DualBall};
use crate::diagnostics::{first_last_tenth_means, gap_bound_check, max_coordinate_gap};
use crate::error::Result;
use crate::instances::{ensvm_closed_form, gen_ensvm, SyntheticSaddle, UpdateForm};
use crate::linalg::{add, dist, dot, norm, norm_sq, sub};
use crate::model::{BlockModel, BlockVector};
use crate::rng::Rng;
use crate::solver::{draw_block, run_appal, run_spdc, SolverConfig, SolverState, StepSchedule};
use crate::tolerances::{
    BLOCK_ORACLE, FINITE_DIFFERENCE, GAP_BOUND_SLACK, KINK_EXCLUSION, LYAPUNOV_ROUNDING,
    MOREAU_ORTHOGONALITY, MOREAU_RESIDUAL, PROJECTION_INEQUALITY, TRAJECTORY,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("projection identities", projections),
    ("augmented-Lagrangian gradients", phi_gradients),
    ("single-block reduction", single_block_reduction),
    ("elastic-net block oracle", ensvm_oracle),
    ("fast and generic paths agree", fast_vs_generic),
    ("dual bound covers multiplier", dual_bound),
    ("augmented-Lagrangian inequalities", inequalities),
    ("Lyapunov lower bound", lyapunov_bound),
    ("determinism", determinism),
    ("uniform block draws", uniform_draws),
];

pub fn run_all() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, check)| match check() {
            Ok((passed, detail)) => CheckOutcome {
                name,
                passed,
                detail,
            },
            Err(e) => CheckOutcome {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn test_cones() -> Result<Vec<Cone>> {
    let mut cones = vec![Cone::orthant(1)?, Cone::orthant(5)?];
    for d in 2..=10 {
        cones.push(Cone::second_order(d)?);
    }
    Ok(cones)
}

fn projections() -> Result<(bool, String)> {
    let mut rng = Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for cone in test_cones()? {
        let m = cone.dim();
        for _ in 0..1000 {
            let y = rng.normal_vec(m);
            let x = rng.normal_vec(m);
            let z = rng.normal_vec(m);
            let py = cone.project_dual(&y)?;
            let ny = cone.project_neg(&y)?;
            let moreau = norm(&sub(&y, &add(&py, &ny))) / (MOREAU_RESIDUAL * (1.0 + norm(&y)));
            let orth = dot(&py, &ny).abs() / (MOREAU_ORTHOGONALITY * (1.0 + norm_sq(&y)));
            let px = cone.project_dual(&x)?;
            let expand = (dist(&px, &py) - dist(&x, &y)).max(0.0) / PROJECTION_INEQUALITY;
            let w = cone.project_dual(&z)?;
            let vi = dot(&sub(&w, &px), &sub(&x, &px)).max(0.0) / PROJECTION_INEQUALITY;
            let a = cone.project_dual(&add(&z, &x))?;
            let b = cone.project_dual(&add(&z, &y))?;
            let three =
                (2.0 * dot(&sub(&a, &b), &x) - norm_sq(&sub(&x, &y)) - norm_sq(&sub(&a, &z))
                    + norm_sq(&sub(&b, &z)))
                .max(0.0)
                    / PROJECTION_INEQUALITY;
            worst = worst.max(moreau).max(orth).max(expand).max(vi).max(three);
        }
    }
    Ok((
        worst <= 1.0,
        format!("worst violation / tolerance = {worst:.3e}"),
    ))
}

fn near_kink(cone: &Cone, y: &[f64]) -> bool {
    if cone.is_orthant() {
        y.iter().any(|v| v.abs() < KINK_EXCLUSION)
    } else {
        let tail = norm(&y[1..]);
        (y[0].abs() - tail).abs() < KINK_EXCLUSION || tail < KINK_EXCLUSION
    }
}

fn phi_gradients() -> Result<(bool, String)> {
    let mut rng = Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut tested = 0;
    for cone in [Cone::orthant(3)?, Cone::second_order(4)?] {
        let params = AugLagParams::new(0.7, cone.clone(), DualBall::unbounded())?;
        let m = cone.dim();
        while tested < 100 * if cone.is_orthant() { 1 } else { 2 } {
            let theta = rng.normal_vec(m);
            let p = cone.project_dual(&rng.normal_vec(m))?;
            let y: Vec<f64> = p
                .iter()
                .zip(&theta)
                .map(|(a, t)| a + params.gamma * t)
                .collect();
            if near_kink(&cone, &y) {
                continue;
            }
            tested += 1;
            let gt = phi_grad_theta(&params, &theta, &p)?;
            let gp = phi_grad_p(&params, &theta, &p)?;
            for j in 0..m {
                let h = 1e-6 * (1.0 + norm(&theta));
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += h;
                tm[j] -= h;
                let fd = (phi_value(&params, &tp, &p)? - phi_value(&params, &tm, &p)?) / (2.0 * h);
                worst = worst.max((fd - gt[j]).abs() / gt[j].abs().max(1.0));
                let h = 1e-6 * (1.0 + norm(&p));
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[j] += h;
                pm[j] -= h;
                let fd = (phi_value(&params, &theta, &pp)? - phi_value(&params, &theta, &pm)?)
                    / (2.0 * h);
                worst = worst.max((fd - gp[j]).abs() / gp[j].abs().max(1.0));
            }
        }
    }
    Ok((
        worst <= FINITE_DIFFERENCE,
        format!("worst relative error = {worst:.3e}"),
    ))
}

fn history_gap(
    a: &SolverConfig,
    spec_a: &mut dyn BlockModel,
    spec_b: &mut dyn BlockModel,
    params: &AugLagParams,
    schedule: &StepSchedule,
) -> Result<f64> {
    let spdc = run_spdc(spec_a, params, schedule, a)?;
    let appal = run_appal(spec_b, params, schedule, a)?;
    let (ha, hb) = (spdc.trace.history.unwrap(), appal.trace.history.unwrap());
    let mut gap = 0.0f64;
    for (x, y) in ha.iterates.iter().zip(&hb.iterates) {
        gap = gap.max(max_coordinate_gap(x, y));
    }
    for (x, y) in ha.duals.iter().zip(&hb.duals) {
        gap = gap.max(max_coordinate_gap(x, y));
    }
    Ok(gap)
}

fn single_block_reduction() -> Result<(bool, String)> {
    let saddle = SyntheticSaddle::generate(6, 5)?;
    let mut a = saddle.problem_spec(1)?;
    let mut b = a.clone();
    let params = AugLagParams::new(1.0, Cone::orthant(1)?, DualBall::new(1e6)?)?;
    let cap = a.max_step_bound(1.0)?;
    let schedule = StepSchedule::power_law_scaled(0.6, 10.0, 0.5, cap)?;
    let config = SolverConfig {
        iterations: 300,
        keep_history: true,
        ..Default::default()
    };
    let gap_saddle = history_gap(&config, &mut a, &mut b, &params, &schedule)?;

    let inst = gen_ensvm(10, 40, 3, 0.4, 5)?;
    let params = AugLagParams::new(1.0, Cone::orthant(1)?, DualBall::new(1e6)?)?;
    let mut fa = inst.fast_model();
    let mut fb = inst.fast_model();
    let cap = crate::model::max_step_bound(&fa.step_constants(), 1.0)?;
    let schedule = StepSchedule::power_law_scaled(0.6, 10.0, 0.5, cap)?;
    let gap_ensvm = history_gap(&config, &mut fa, &mut fb, &params, &schedule)?;
    let gap = gap_saddle.max(gap_ensvm);
    Ok((gap <= TRAJECTORY, format!("max coordinate gap = {gap:.3e}")))
}

/// Minimizes a strictly convex scalar function on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn ensvm_oracle() -> Result<(bool, String)> {
    let mut rng = Rng::seed_from_u64(13);
    let mut worst_default = 0.0f64;
    let mut worst_flipped = 0.0f64;
    for _ in 0..10 {
        let lambda = rng.uniform();
        let q = rng.uniform_in(0.0, 3.0);
        let eps = rng.uniform_in(0.01, 0.5);
        let current = rng.normal_vec(4);
        let grad = rng.normal_vec(4);
        let x = ensvm_closed_form(lambda, &current, &grad, q, eps, UpdateForm::Descent);
        let y = ensvm_closed_form(lambda, &current, &grad, q, eps, UpdateForm::AscentSign);
        for j in 0..4 {
            let (u, g) = (current[j], grad[j]);
            let f = |t: f64| {
                g * t
                    + q * (lambda * t.abs() + (1.0 - lambda) * t * t)
                    + (t - u).powi(2) / (2.0 * eps)
            };
            let bound = u.abs() + eps * (g.abs() + q) + 1.0;
            let best = golden_section(f, -bound, bound);
            worst_default = worst_default.max((x[j] - best).abs());
            worst_flipped = worst_flipped.max((y[j] - best).abs());
        }
    }
    Ok((
        worst_default <= BLOCK_ORACLE && worst_flipped > BLOCK_ORACLE,
        format!(
            "default form error = {worst_default:.3e}, flipped-sign error = {worst_flipped:.3e}"
        ),
    ))
}

fn fast_vs_generic() -> Result<(bool, String)> {
    let inst = gen_ensvm(12, 30, 3, 0.4, 9)?.with_blocks(5)?;
    let mut fast = inst.fast_model();
    let mut generic = inst.problem_spec()?;
    let params = AugLagParams::new(1.0, Cone::orthant(1)?, DualBall::new(inst.dual_bound())?)?;
    let cap = crate::model::max_step_bound(&fast.step_constants(), 1.0)?;
    let schedule = StepSchedule::power_law_scaled(0.6, 10.0, 0.5, cap)?;
    let config = SolverConfig {
        iterations: 100,
        seed: 3,
        keep_history: true,
        ..Default::default()
    };
    let a = run_spdc(&mut fast, &params, &schedule, &config)?;
    let b = run_spdc(&mut generic, &params, &schedule, &config)?;
    let (ha, hb) = (a.trace.history.unwrap(), b.trace.history.unwrap());
    let gap = ha
        .iterates
        .iter()
        .zip(&hb.iterates)
        .map(|(x, y)| max_coordinate_gap(x, y))
        .fold(0.0, f64::max);
    Ok((gap <= 1e-10, format!("max coordinate gap = {gap:.3e}")))
}

fn dual_bound() -> Result<(bool, String)> {
    let mut worst_margin = f64::INFINITY;
    for seed in 0..20 {
        let s = SyntheticSaddle::generate(5, seed)?;
        let input = s.slater_input();
        let mu = dual_bound_orthant(&input, s.objective(&input.slater_point))?;
        worst_margin = worst_margin.min(mu - s.p_star);
    }
    Ok((
        worst_margin >= 0.0,
        format!("smallest mu - p* = {worst_margin:.3e}"),
    ))
}

fn inequalities() -> Result<(bool, String)> {
    let s = SyntheticSaddle::generate(6, 21)?;
    let spec = s.problem_spec(3)?;
    let reference = s.saddle_point(spec.layout().clone())?;
    let params = AugLagParams::new(0.8, Cone::orthant(1)?, DualBall::unbounded())?;
    let mut rng = Rng::seed_from_u64(14);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let mut x = s.u_star.clone();
        for v in x.iter_mut() {
            *v += 2.0 * rng.normal();
        }
        let u = BlockVector::from_flat(spec.layout().clone(), x)?;
        let report = gap_bound_check(&spec, &params, &u, &reference, None)?;
        for pair in report.pairs() {
            worst = worst.max(pair.lhs - pair.rhs);
        }
    }
    Ok((
        worst <= GAP_BOUND_SLACK,
        format!("largest lhs - rhs = {worst:.3e}"),
    ))
}

fn lyapunov_bound() -> Result<(bool, String)> {
    let s = SyntheticSaddle::generate(8, 4)?;
    let mut spec = s.problem_spec(4)?;
    let reference = s.saddle_point(spec.layout().clone())?;
    let params = AugLagParams::new(1.0, Cone::orthant(1)?, DualBall::new(s.p_star + 5.0)?)?;
    let cap = spec.max_step_bound(1.0)?;
    let schedule = StepSchedule::power_law_scaled(0.6, 10.0, 0.5, cap)?;
    let config = SolverConfig {
        iterations: 4000,
        seed: 2,
        thinning: 20,
        reference: Some(reference.clone()),
        keep_history: true,
        history_every: 20,
        ..Default::default()
    };
    let out = run_spdc(&mut spec, &params, &schedule, &config)?;
    let history = out.trace.history.as_ref().unwrap();
    let beta = spec.core().beta();
    let mut ok = true;
    let mut values = Vec::new();
    for (rec, u) in out.trace.records.iter().zip(&history.iterates) {
        let lyap = rec.lyapunov.unwrap_or(f64::NAN);
        values.push(lyap);
        let floor = 0.5 * beta * norm_sq(&sub(u, reference.u.as_slice()));
        ok &= lyap.is_finite() && lyap >= floor - LYAPUNOV_ROUNDING;
    }
    let (first, last) = first_last_tenth_means(&values).unwrap_or((0.0, f64::INFINITY));
    Ok((
        ok && last < first,
        format!("bound held: {ok}, first/last tenth means = {first:.3e}/{last:.3e}"),
    ))
}

fn determinism() -> Result<(bool, String)> {
    let inst = gen_ensvm(10, 40, 3, 0.4, 5)?.with_blocks(4)?;
    let params = AugLagParams::new(1.0, Cone::orthant(1)?, DualBall::new(inst.dual_bound())?)?;
    let mut model = inst.fast_model();
    let cap = crate::model::max_step_bound(&model.step_constants(), 1.0)?;
    let schedule = StepSchedule::power_law_scaled(0.6, 10.0, 0.5, cap)?;
    let config = SolverConfig {
        iterations: 500,
        seed: 99,
        thinning: 10,
        optimal_value: Some(0.0),
        ..Default::default()
    };
    let a = run_spdc(&mut model, &params, &schedule, &config)?;
    let b = run_spdc(&mut model, &params, &schedule, &config)?;
    let same = a.trace.records.len() == b.trace.records.len()
        && a.trace.records.iter().zip(&b.trace.records).all(|(x, y)| {
            x.block == y.block
                && x.eps.to_bits() == y.eps.to_bits()
                && x.objective.to_bits() == y.objective.to_bits()
                && x.feasibility.to_bits() == y.feasibility.to_bits()
                && x.dual_residual.to_bits() == y.dual_residual.to_bits()
        });
    Ok((same, format!("{} records compared", a.trace.records.len())))
}

fn uniform_draws() -> Result<(bool, String)> {
    let s = SyntheticSaddle::generate(100, 1)?;
    let mut worst = 0.0f64;
    for n_blocks in [4usize, 10, 100] {
        let spec = s.problem_spec(n_blocks)?;
        let params = AugLagParams::new(1.0, Cone::orthant(1)?, DualBall::unbounded())?;
        let u = vec![0.0; 100];
        let mut state = SolverState::new(&spec, &params, u, vec![0.0], 0)?;
        let draws = 100_000;
        let mut counts = vec![0usize; n_blocks];
        for _ in 0..draws {
            counts[draw_block(&mut state)] += 1;
        }
        let p = 1.0 / n_blocks as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            worst = worst.max((c as f64 / draws as f64 - p).abs() / sigma);
        }
    }
    Ok((
        worst <= 3.0,
        format!("largest deviation = {worst:.2} sigma"),
    ))
}
