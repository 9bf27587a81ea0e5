//! Solution quality and convergence-rate measurements.

use serde::{Deserialize, Serialize};

use crate::auglag::{eval_l_gamma, lagrangian, xi_from_theta, AugLagParams};
use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm, norm_sq, sub};
use crate::model::{max_step_bound, BlockModel, BlockVector, SaddlePoint};
use crate::solver::IterationTrace;
use crate::tolerances::{LOG_FLOOR, STATIONARITY_STEP};

/// `dist₋C(θ) = ‖Π(θ)‖`.
pub fn feasibility_dist(cone: &Cone, theta: &[f64]) -> Result<f64> {
    Ok(norm(&cone.project_dual(theta)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// `|(G+J)(u) − (G+J)(u*)|`, or the raw objective when no optimum is known.
    pub suboptimality: f64,
    pub suboptimality_is_raw: bool,
    pub feasibility: f64,
    /// `|⟨p, Θ(u)⟩|`
    pub kkt_complementarity: f64,
    /// Fixed-point residual of the full primal map.
    pub kkt_stationarity: f64,
    pub lyapunov: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions<'a> {
    pub reference: Option<&'a SaddlePoint>,
    pub optimal_value: Option<f64>,
    /// Step `εᵏ` for the Lyapunov value; requires `reference`.
    pub lyapunov_eps: Option<f64>,
}

/// Probe step for the stationarity residual: `min(1e-3, ε̄/2)`.
pub fn stationarity_step<M: BlockModel + ?Sized>(model: &M, gamma: f64) -> Result<f64> {
    let bound = max_step_bound(&model.step_constants(), gamma)?;
    Ok(STATIONARITY_STEP.min(0.5 * bound))
}

/// `‖u − T(u)‖ / ε` where `T` updates every block from `u` with `q = Π(p + γΘ(u))`.
///
/// Leaves the model prepared at `u`.
pub fn stationarity_residual<M: BlockModel + ?Sized>(
    model: &mut M,
    params: &AugLagParams,
    u: &BlockVector,
    p: &[f64],
    eps: f64,
) -> Result<f64> {
    let theta = model.constraint_value(u);
    let q = params.multiplier_estimate(&theta, p)?;
    model.prepare(u);
    let mut sq = 0.0;
    for i in 0..model.layout().n_blocks() {
        let x = model.solve_block(u, i, &q, eps)?;
        sq += norm_sq(&sub(u.block(i), &x));
    }
    Ok(sq.sqrt() / eps)
}

/// `Λ = D(u*, u) + (ε/2γN)‖p* − p‖² + ε(L(u, p*) − L(u*, p*))`.
pub fn lyapunov<M: BlockModel + ?Sized>(
    model: &M,
    params: &AugLagParams,
    u: &BlockVector,
    p: &[f64],
    reference: &SaddlePoint,
    eps: f64,
) -> Result<f64> {
    let n_blocks = model.layout().n_blocks() as f64;
    let d = model
        .core()
        .distance(reference.u.as_slice(), u.as_slice())?;
    check_len(reference.p.len(), p.len())?;
    let dual = norm_sq(&sub(&reference.p, p));
    let gap = lagrangian(model, u, &reference.p)? - lagrangian(model, &reference.u, &reference.p)?;
    Ok(d + eps / (2.0 * params.gamma * n_blocks) * dual + eps * gap)
}

pub fn kkt_report<M: BlockModel + ?Sized>(
    model: &mut M,
    params: &AugLagParams,
    u: &BlockVector,
    p: &[f64],
    options: &ReportOptions<'_>,
) -> Result<QualityReport> {
    if options.lyapunov_eps.is_some() && options.reference.is_none() {
        return Err(Error::Config(
            "the Lyapunov value needs a reference saddle point".into(),
        ));
    }
    let objective = model.objective(u);
    let theta = model.constraint_value(u);
    check_len(theta.len(), p.len())?;
    let optimum = options
        .optimal_value
        .or_else(|| options.reference.map(|r| model.objective(&r.u)));
    let eps = stationarity_step(model, params.gamma)?;
    let kkt_stationarity = stationarity_residual(model, params, u, p, eps)?;
    let lyap = match (options.reference, options.lyapunov_eps) {
        (Some(r), Some(e)) => Some(lyapunov(model, params, u, p, r, e)?),
        _ => None,
    };
    Ok(QualityReport {
        suboptimality: optimum.map_or(objective, |v| (objective - v).abs()),
        suboptimality_is_raw: optimum.is_none(),
        feasibility: feasibility_dist(&params.cone, &theta)?,
        kkt_complementarity: dot(p, &theta).abs(),
        kkt_stationarity,
        lyapunov: lyap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityPair {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityPair {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// Both sides of the three augmented-Lagrangian inequalities at a point `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBoundReport {
    /// `‖Θ(u) − ξ(u, p*)‖² ≤ (2/γ)ΔL_γ`
    pub slack_gap: InequalityPair,
    /// `|(G+J)(u) − (G+J)(u*)| ≤ ΔL_γ + μ₀·√((2/γ)ΔL_γ)`
    pub suboptimality: InequalityPair,
    /// `‖Π(Θ(u))‖² ≤ (2/γ)ΔL_γ`
    pub feasibility: InequalityPair,
    /// `ΔL_γ = L_γ(u, p*) − L_γ(u*, p*)`
    pub delta_l: f64,
}

impl GapBoundReport {
    pub fn pairs(&self) -> [InequalityPair; 3] {
        [self.slack_gap, self.suboptimality, self.feasibility]
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.pairs().iter().all(|p| p.holds(slack))
    }
}

/// Evaluates the inequalities at `u` against a known saddle point. `mu0` bounds `‖p*‖`
/// and defaults to `‖p*‖` itself.
pub fn gap_bound_check<M: BlockModel + ?Sized>(
    model: &M,
    params: &AugLagParams,
    u: &BlockVector,
    reference: &SaddlePoint,
    mu0: Option<f64>,
) -> Result<GapBoundReport> {
    let p_star = &reference.p;
    let delta_l = eval_l_gamma(model, params, u, p_star)?
        - eval_l_gamma(model, params, &reference.u, p_star)?;
    let scaled = 2.0 / params.gamma * delta_l;
    let theta = model.constraint_value(u);
    let xi = xi_from_theta(params, &theta, p_star)?;
    let mu0 = mu0.unwrap_or_else(|| norm(p_star));
    let sub_gap = (model.objective(u) - model.objective(&reference.u)).abs();
    Ok(GapBoundReport {
        slack_gap: InequalityPair {
            lhs: norm_sq(&sub(&theta, &xi)),
            rhs: scaled,
        },
        suboptimality: InequalityPair {
            lhs: sub_gap,
            rhs: delta_l + mu0 * scaled.max(0.0).sqrt(),
        },
        feasibility: InequalityPair {
            lhs: norm_sq(&params.cone.project_dual(&theta)?),
            rhs: scaled,
        },
        delta_l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMetric {
    Suboptimality,
    Feasibility,
}

/// Power-law fit `metric(t) ≈ C·t^slope` over a post-burn-in window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// First and last iteration index in the window.
    pub window: (u64, u64),
    pub window_records: usize,
    pub slope: f64,
    pub intercept: f64,
    /// `−(1−α)/2` for a single path, `−(1−α)` for a mean over several.
    pub target_exponent: f64,
    /// Smallest `C` with `metric(t) ≤ C·t^{target_exponent}` over the window.
    pub envelope_constant: f64,
    /// Records whose metric was clipped to the log floor.
    pub clipped_records: usize,
    pub non_convergent: bool,
}

impl RateFit {
    /// One-sided check: the observed decay is at least as steep as `target + slack`.
    pub fn meets(&self, exponent: f64, slack: f64) -> bool {
        self.slope <= exponent + slack
    }
}

/// Slopes above this are reported as non-convergent.
pub const NON_CONVERGENT_SLOPE: f64 = -1e-3;

/// The `(k, metric)` series of one trace, or the across-trace mean when several
/// traces with identical record indices are given, with records at `k = 0` and then
/// the first `burn_in` fraction dropped.
pub fn rate_window(
    traces: &[&IterationTrace],
    metric: RateMetric,
    burn_in: f64,
) -> Result<Vec<(u64, f64)>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("no traces to fit".into()))?;
    if !(0.0..1.0).contains(&burn_in) {
        return Err(Error::InvalidArgument(format!(
            "burn-in fraction {burn_in} not in [0, 1)"
        )));
    }
    let pick = |rec: &crate::solver::IterationRecord| -> Result<f64> {
        match metric {
            RateMetric::Feasibility => Ok(rec.feasibility),
            RateMetric::Suboptimality => rec
                .suboptimality
                .ok_or_else(|| Error::InvalidArgument("trace has no suboptimality column".into())),
        }
    };
    let mut series: Vec<(u64, f64)> = Vec::new();
    for (idx, rec) in first.records.iter().enumerate() {
        if rec.k == 0 {
            continue;
        }
        let mut sum = pick(rec)?;
        for other in &traces[1..] {
            let o = other
                .records
                .get(idx)
                .filter(|r| r.k == rec.k)
                .ok_or_else(|| Error::InvalidArgument("traces are not aligned".into()))?;
            sum += pick(o)?;
        }
        series.push((rec.k, sum / traces.len() as f64));
    }
    let skip = (burn_in * series.len() as f64).floor() as usize;
    Ok(series.split_off(skip))
}

/// Smallest `C` with `v ≤ C·k^exponent` for every `(k, v)` in `window`.
pub fn envelope_constant(window: &[(u64, f64)], exponent: f64) -> f64 {
    window
        .iter()
        .map(|(k, v)| v.max(0.0) * (*k as f64).powf(-exponent))
        .fold(0.0, f64::max)
}

/// Fits the decay of `metric` over [`rate_window`] by least squares in log-log scale.
pub fn fit_rate(
    traces: &[&IterationTrace],
    metric: RateMetric,
    alpha: f64,
    burn_in: f64,
) -> Result<RateFit> {
    let window = rate_window(traces, metric, burn_in)?;
    if window.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "rate window has {} records, need at least 10",
            window.len()
        )));
    }
    let mut clipped = 0;
    let points: Vec<(f64, f64)> = window
        .iter()
        .map(|(k, v)| {
            let v = if *v < LOG_FLOOR {
                clipped += 1;
                LOG_FLOOR
            } else {
                *v
            };
            ((*k as f64).ln(), v.ln())
        })
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "rate window spans a single iteration".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let target_exponent = if traces.len() > 1 {
        -(1.0 - alpha)
    } else {
        -(1.0 - alpha) / 2.0
    };
    let envelope_constant = envelope_constant(&window, target_exponent);
    Ok(RateFit {
        window: (window[0].0, window[window.len() - 1].0),
        window_records: window.len(),
        slope,
        intercept,
        target_exponent,
        envelope_constant,
        clipped_records: clipped,
        non_convergent: slope > NON_CONVERGENT_SLOPE,
    })
}

/// Mean of the first and last tenth of a series, for trend checks.
pub fn first_last_tenth_means(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 10 {
        return None;
    }
    let w = n / 10;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&values[..w]), mean(&values[n - w..])))
}

/// Largest coordinate-wise gap between two points.
pub fn max_coordinate_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::IterationRecord;

    fn planted(exponent: f64, c: f64, n: u64) -> IterationTrace {
        IterationTrace {
            thinning: 10,
            records: (0..=n)
                .map(|i| {
                    let k = i * 10;
                    let v = if k == 0 {
                        c
                    } else {
                        c * (k as f64).powf(exponent)
                    };
                    IterationRecord {
                        k,
                        block: None,
                        eps: 0.1,
                        objective: v,
                        suboptimality: Some(v),
                        feasibility: v,
                        dual_residual: 0.0,
                        lyapunov: None,
                        wall_ns: 0,
                    }
                })
                .collect(),
            history: None,
        }
    }

    #[test]
    fn feasibility_examples() {
        let orth = Cone::orthant(2).unwrap();
        assert_eq!(feasibility_dist(&orth, &[-1.0, -2.0]).unwrap(), 0.0);
        assert_eq!(feasibility_dist(&orth, &[3.0, -1.0]).unwrap(), 3.0);
        let soc = Cone::second_order(3).unwrap();
        assert!((feasibility_dist(&soc, &[0.0, 3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn fit_recovers_planted_exponents() {
        for e in [-0.2, -0.4, -0.5] {
            let t = planted(e, 3.0, 1000);
            let fit = fit_rate(&[&t], RateMetric::Suboptimality, 0.6, 0.1).unwrap();
            assert!((fit.slope - e).abs() < 1e-6, "{} vs {e}", fit.slope);
            assert!(!fit.non_convergent);
        }
    }

    #[test]
    fn constant_metric_is_flagged() {
        let t = planted(0.0, 1.0, 200);
        let fit = fit_rate(&[&t], RateMetric::Feasibility, 0.6, 0.1).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(fit.non_convergent);
        let short = planted(0.0, 1.0, 2000);
        let longer = fit_rate(&[&short], RateMetric::Feasibility, 0.6, 0.1).unwrap();
        assert!(longer.envelope_constant > fit.envelope_constant);
    }

    #[test]
    fn mean_over_traces_uses_expected_exponent() {
        let a = planted(-0.3, 1.0, 100);
        let b = planted(-0.3, 3.0, 100);
        let fit = fit_rate(&[&a, &b], RateMetric::Feasibility, 0.6, 0.1).unwrap();
        assert!((fit.slope + 0.3).abs() < 1e-9);
        assert!((fit.target_exponent + 0.4).abs() < 1e-15);
    }

    #[test]
    fn short_window_and_zero_values() {
        let t = planted(-0.5, 1.0, 5);
        assert!(fit_rate(&[&t], RateMetric::Feasibility, 0.6, 0.1).is_err());
        let mut z = planted(-0.5, 1.0, 50);
        z.records[30].feasibility = 0.0;
        let fit = fit_rate(&[&z], RateMetric::Feasibility, 0.6, 0.1).unwrap();
        assert_eq!(fit.clipped_records, 1);
    }
}
