//! Augmented Lagrangian with the slack variable eliminated in closed form.
//!
//! With `Π` the projection onto `C*`,
//!
//! ```text
//! φ(θ, p)   = (‖Π(p + γθ)‖² − ‖p‖²) / 2γ
//! L_γ(u, p) = (G + J)(u) + φ(Θ(u), p)
//! ```
//!
//! and the eliminated slack is `ξ(u, p) = Π₋C(Θ(u) + p/γ)`.

use serde::{Deserialize, Serialize};

use crate::cones::{Cone, DualBall};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm_p, norm_sq, sub};
use crate::model::{BlockModel, BlockVector};

/// Penalty, cone and dual ball radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugLagParams {
    pub gamma: f64,
    pub cone: Cone,
    pub ball: DualBall,
}

impl AugLagParams {
    pub fn new(gamma: f64, cone: Cone, ball: DualBall) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be a positive finite number, got {gamma}"
            )));
        }
        Ok(Self { gamma, cone, ball })
    }

    fn shifted(&self, theta: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        check_len(self.cone.dim(), theta.len())?;
        check_len(self.cone.dim(), p.len())?;
        let y: Vec<f64> = p
            .iter()
            .zip(theta)
            .map(|(pi, ti)| pi + self.gamma * ti)
            .collect();
        self.cone.project_dual(&y)
    }

    /// `q = Π(p + γθ)`, the multiplier estimate used by the primal step.
    pub fn multiplier_estimate(&self, theta: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        self.shifted(theta, p)
    }
}

pub fn phi_value(params: &AugLagParams, theta: &[f64], p: &[f64]) -> Result<f64> {
    let q = params.shifted(theta, p)?;
    Ok((norm_sq(&q) - norm_sq(p)) / (2.0 * params.gamma))
}

/// `∇_θ φ = Π(p + γθ)`
pub fn phi_grad_theta(params: &AugLagParams, theta: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    params.shifted(theta, p)
}

/// `∇_p φ = (Π(p + γθ) − p) / γ`
pub fn phi_grad_p(params: &AugLagParams, theta: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let q = params.shifted(theta, p)?;
    Ok(q.iter()
        .zip(p)
        .map(|(qi, pi)| (qi - pi) / params.gamma)
        .collect())
}

fn check_cone<M: BlockModel + ?Sized>(model: &M, params: &AugLagParams) -> Result<()> {
    if model.cone() != &params.cone {
        return Err(Error::Config(
            "augmented-Lagrangian cone differs from the problem cone".into(),
        ));
    }
    Ok(())
}

/// `L(u, p) = (G + J)(u) + ⟨p, Θ(u)⟩`
pub fn lagrangian<M: BlockModel + ?Sized>(model: &M, u: &BlockVector, p: &[f64]) -> Result<f64> {
    let theta = model.constraint_value(u);
    check_len(theta.len(), p.len())?;
    Ok(model.objective(u) + dot(p, &theta))
}

/// `L_γ(u, p) = (G + J)(u) + φ(Θ(u), p)`
pub fn eval_l_gamma<M: BlockModel + ?Sized>(
    model: &M,
    params: &AugLagParams,
    u: &BlockVector,
    p: &[f64],
) -> Result<f64> {
    check_cone(model, params)?;
    let theta = model.constraint_value(u);
    Ok(model.objective(u) + phi_value(params, &theta, p)?)
}

/// `L̄_γ(u, ξ, p) = (G + J)(u) + ⟨p, Θ(u) − ξ⟩ + (γ/2)‖Θ(u) − ξ‖²`, before slack elimination.
pub fn eval_l_gamma_slack<M: BlockModel + ?Sized>(
    model: &M,
    params: &AugLagParams,
    u: &BlockVector,
    xi: &[f64],
    p: &[f64],
) -> Result<f64> {
    check_cone(model, params)?;
    let theta = model.constraint_value(u);
    check_len(theta.len(), xi.len())?;
    check_len(theta.len(), p.len())?;
    let r = sub(&theta, xi);
    Ok(model.objective(u) + dot(p, &r) + 0.5 * params.gamma * norm_sq(&r))
}

/// The slack minimizing `L̄_γ(u, ·, p)` over `−C`: `Π₋C(Θ(u) + p/γ)`.
pub fn xi_opt<M: BlockModel + ?Sized>(
    model: &M,
    params: &AugLagParams,
    u: &BlockVector,
    p: &[f64],
) -> Result<Vec<f64>> {
    check_cone(model, params)?;
    let theta = model.constraint_value(u);
    xi_from_theta(params, &theta, p)
}

pub(crate) fn xi_from_theta(params: &AugLagParams, theta: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    check_len(params.cone.dim(), theta.len())?;
    check_len(params.cone.dim(), p.len())?;
    let y: Vec<f64> = theta
        .iter()
        .zip(p)
        .map(|(t, pi)| t + pi / params.gamma)
        .collect();
    params.cone.project_neg(&y)
}

/// Data for the dual-bound estimates: a strictly feasible point and a lower bound on the optimal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBoundInput {
    /// The Slater point `û`, kept for reference.
    pub slater_point: Vec<f64>,
    /// Lower bound on `(G + J)(u*)`; `0` for nonnegative objectives.
    pub objective_lower_bound: f64,
    /// `Θ(û)`.
    pub constraint_at_slater: Vec<f64>,
    /// Norm index `ν > 1` of the cone `{x₀ ≥ ‖x̄‖_ν}`; `2` when absent.
    pub soc_norm_index: Option<f64>,
}

/// `μ = [(G+J)(û) − lower] / minⱼ(−Θʲ(û)) + 1` for `C = ℝ₊^m`.
pub fn dual_bound_orthant(input: &DualBoundInput, objective_at_slater: f64) -> Result<f64> {
    let theta = &input.constraint_at_slater;
    if theta.is_empty() {
        return Err(Error::InvalidArgument("empty constraint value".into()));
    }
    if let Some(j) = theta.iter().position(|t| !(*t < 0.0)) {
        return Err(Error::SlaterViolation(format!(
            "component {j} of the constraint at the Slater point is {} (must be < 0)",
            theta[j]
        )));
    }
    let slack = theta.iter().fold(f64::INFINITY, |m, t| m.min(-t));
    let gap = objective_at_slater - input.objective_lower_bound;
    if gap < 0.0 {
        return Err(Error::InvalidArgument(
            "objective at the Slater point is below the lower bound".into(),
        ));
    }
    Ok(gap / slack + 1.0)
}

/// Bound for the cone `{x₀ ≥ ‖x̄‖_ν}` with `Θ(û) = (θ₀, θ̄)`:
///
/// ```text
/// μ = m^{max((ω−2)/2ω, 0)} · 2^{1/ω} · [(G+J)(û) − lower] / (|θ₀| − ‖θ̄‖_ν) + 1,   1/ω + 1/ν = 1
/// ```
///
/// where `m` is the length of `θ̄`. The denominator uses `|θ₀|`: a Slater point has
/// `θ₀ < −‖θ̄‖_ν`, so the margin `|θ₀| − ‖θ̄‖_ν` is the positive quantity the bound needs.
pub fn dual_bound_soc(input: &DualBoundInput, objective_at_slater: f64) -> Result<f64> {
    let theta = &input.constraint_at_slater;
    if theta.len() < 2 {
        return Err(Error::InvalidArgument(
            "second-order cone constraint needs dimension >= 2".into(),
        ));
    }
    let nu = input.soc_norm_index.unwrap_or(2.0);
    if !(nu > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "norm index must be > 1, got {nu}"
        )));
    }
    let omega = if nu.is_infinite() {
        1.0
    } else {
        nu / (nu - 1.0)
    };
    let tail = &theta[1..];
    let margin = theta[0].abs() - norm_p(tail, nu);
    if !(margin > 0.0) {
        return Err(Error::SlaterViolation(format!(
            "|θ₀| − ‖θ̄‖_ν = {margin} must be > 0"
        )));
    }
    let gap = objective_at_slater - input.objective_lower_bound;
    if gap < 0.0 {
        return Err(Error::InvalidArgument(
            "objective at the Slater point is below the lower bound".into(),
        ));
    }
    let m = tail.len() as f64;
    let exponent = ((omega - 2.0) / (2.0 * omega)).max(0.0);
    Ok(m.powf(exponent) * 2f64.powf(1.0 / omega) * gap / margin + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::Cone;
    use crate::model::{BlockLayout, ConstraintBlock, ProblemSpec, Smooth};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use std::sync::Arc;

    fn orthant1(gamma: f64) -> AugLagParams {
        AugLagParams::new(gamma, Cone::orthant(1).unwrap(), DualBall::unbounded()).unwrap()
    }

    #[test]
    fn phi_examples() {
        let p = orthant1(1.0);
        assert_eq!(phi_value(&p, &[0.0], &[0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(phi_value(&p, &[1.0], &[1.0]).unwrap(), 1.5);
        assert_abs_diff_eq!(phi_value(&p, &[-5.0], &[1.0]).unwrap(), -0.5);
        assert_eq!(phi_grad_theta(&p, &[0.0], &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(phi_grad_theta(&p, &[1.0], &[1.0]).unwrap(), vec![2.0]);
        assert_eq!(phi_grad_theta(&p, &[-5.0], &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(phi_grad_p(&p, &[0.0], &[3.0]).unwrap(), vec![0.0]);
        assert_eq!(phi_grad_p(&p, &[1.0], &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(
            phi_grad_p(&orthant1(2.0), &[-5.0], &[1.0]).unwrap(),
            vec![-0.5]
        );
    }

    #[test]
    fn nonpositive_gamma_is_rejected() {
        assert!(AugLagParams::new(0.0, Cone::orthant(1).unwrap(), DualBall::unbounded()).is_err());
        let mut p = orthant1(1.0);
        p.gamma = -1.0;
        assert!(phi_value(&p, &[0.0], &[0.0]).is_err());
    }

    fn scalar_linear(coef: f64, offset: f64) -> ProblemSpec {
        ProblemSpec::builder(BlockLayout::equal(1, 1).unwrap(), Cone::orthant(1).unwrap())
            .smooth(Smooth::ShiftedQuadratic { center: vec![0.0] }, 1.0)
            .constraint(
                0,
                ConstraintBlock::Linear(Arc::new(Array2::from_elem((1, 1), coef))),
            )
            .constraint_offset(vec![offset])
            .build()
            .unwrap()
    }

    #[test]
    fn xi_examples() {
        // Θ(u) = u with u chosen to hit the example values.
        let spec = scalar_linear(1.0, 0.0);
        let at = |x: f64| BlockVector::from_flat(spec_layout(&spec), vec![x]).unwrap();
        assert_eq!(
            xi_opt(&spec, &orthant1(1.0), &at(-2.0), &[0.0]).unwrap(),
            vec![-2.0]
        );
        assert_eq!(
            xi_opt(&spec, &orthant1(1.0), &at(1.0), &[2.0]).unwrap(),
            vec![0.0]
        );
        assert_eq!(
            xi_opt(&spec, &orthant1(2.0), &at(-3.0), &[2.0]).unwrap(),
            vec![-2.0]
        );
    }

    fn spec_layout(spec: &ProblemSpec) -> Arc<BlockLayout> {
        spec.layout().clone()
    }

    #[test]
    fn l_gamma_at_strictly_feasible_point_with_zero_multiplier() {
        let spec = scalar_linear(1.0, -1.0);
        let u = BlockVector::from_flat(spec.layout().clone(), vec![0.5]).unwrap();
        let l = eval_l_gamma(&spec, &orthant1(3.0), &u, &[0.0]).unwrap();
        assert_abs_diff_eq!(l, 0.125);
    }

    #[test]
    fn l_gamma_matches_slack_form_at_optimal_slack() {
        let spec = scalar_linear(2.0, -1.0);
        let params = orthant1(0.7);
        for (x, p) in [(0.3, 0.0), (2.0, 1.5), (-1.0, 4.0), (0.9, 0.2)] {
            let u = BlockVector::from_flat(spec.layout().clone(), vec![x]).unwrap();
            let xi = xi_opt(&spec, &params, &u, &[p]).unwrap();
            let a = eval_l_gamma(&spec, &params, &u, &[p]).unwrap();
            let b = eval_l_gamma_slack(&spec, &params, &u, &xi, &[p]).unwrap();
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn cone_mismatch_is_a_config_error() {
        let spec = scalar_linear(1.0, 0.0);
        let params = AugLagParams::new(1.0, Cone::zero(1).unwrap(), DualBall::unbounded()).unwrap();
        let u = BlockVector::zeros(spec.layout().clone());
        assert!(matches!(
            eval_l_gamma(&spec, &params, &u, &[0.0]),
            Err(Error::Config(_))
        ));
    }

    fn bound_input(theta: Vec<f64>, nu: Option<f64>) -> DualBoundInput {
        DualBoundInput {
            slater_point: vec![],
            objective_lower_bound: 0.0,
            constraint_at_slater: theta,
            soc_norm_index: nu,
        }
    }

    #[test]
    fn orthant_bound_examples() {
        assert_abs_diff_eq!(
            dual_bound_orthant(&bound_input(vec![-1.0, -2.0], None), 2.0).unwrap(),
            3.0
        );
        assert_abs_diff_eq!(
            dual_bound_orthant(&bound_input(vec![-0.3], None), 0.0).unwrap(),
            1.0
        );
        assert!(matches!(
            dual_bound_orthant(&bound_input(vec![-1.0, 0.0], None), 1.0),
            Err(Error::SlaterViolation(_))
        ));
    }

    #[test]
    fn soc_bound_examples() {
        let one = dual_bound_soc(&bound_input(vec![2.0, 1.0], Some(2.0)), 1.0).unwrap();
        assert!((one - (1.0 + 2f64.sqrt())).abs() <= 1e-12);
        // Seven tail entries with the same ℓ₂ norm give the same bound when ν = 2.
        let tail = 1.0 / 7f64.sqrt();
        let mut theta = vec![2.0];
        theta.extend(std::iter::repeat_n(tail, 7));
        let seven = dual_bound_soc(&bound_input(theta, Some(2.0)), 1.0).unwrap();
        assert!((seven - one).abs() <= 1e-12);
        assert_abs_diff_eq!(
            dual_bound_soc(&bound_input(vec![-3.0, 1.0], None), 0.0).unwrap(),
            1.0
        );
        assert!(matches!(
            dual_bound_soc(&bound_input(vec![1.0, 1.0], None), 1.0),
            Err(Error::SlaterViolation(_))
        ));
    }
}
