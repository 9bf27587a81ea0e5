//! Cones and the projections used by the primal-dual iteration.
//!
//! Every cone handled here is self-dual or has an obvious dual, so `Π`
//! (projection onto `C*`) has a closed form and the projection onto `−C`
//! follows from the Moreau decomposition `y = Π(y) + Π₋C(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::norm;
use crate::tolerances::SOC_AXIS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeKind {
    /// `ℝ₊^m`, self-dual.
    NonnegativeOrthant,
    /// `{(x₀, x̄) : x₀ ≥ ‖x̄‖₂}`, self-dual.
    SecondOrderCone,
    /// `{0}`; its dual is the whole space.
    ZeroCone,
}

/// A single cone of a given dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub dim: usize,
}

impl ConeSpec {
    pub fn new(kind: ConeKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("cone dimension must be >= 1".into()));
        }
        if kind == ConeKind::SecondOrderCone && dim < 2 {
            return Err(Error::InvalidArgument(
                "second-order cone needs dimension >= 2".into(),
            ));
        }
        Ok(Self { kind, dim })
    }

    /// Writes `Π(y)` into `out`. Lengths are assumed checked.
    fn project_dual_into(&self, y: &[f64], out: &mut [f64]) {
        match self.kind {
            ConeKind::NonnegativeOrthant => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = v.max(0.0);
                }
            }
            ConeKind::ZeroCone => out.copy_from_slice(y),
            ConeKind::SecondOrderCone => {
                let x0 = y[0];
                let tail = &y[1..];
                let tail_norm = norm(tail);
                if x0 >= tail_norm {
                    out.copy_from_slice(y);
                } else if x0 <= -tail_norm || tail_norm <= SOC_AXIS {
                    out.iter_mut().for_each(|o| *o = 0.0);
                } else {
                    let half = 0.5 * (x0 + tail_norm);
                    out[0] = half;
                    let s = half / tail_norm;
                    for (o, v) in out[1..].iter_mut().zip(tail) {
                        *o = s * v;
                    }
                }
            }
        }
    }

    /// Membership in `C*` up to `tol`.
    fn dual_contains(&self, y: &[f64], tol: f64) -> bool {
        match self.kind {
            ConeKind::NonnegativeOrthant => y.iter().all(|v| *v >= -tol),
            ConeKind::ZeroCone => true,
            ConeKind::SecondOrderCone => y[0] + tol >= norm(&y[1..]),
        }
    }
}

/// A cone `C = C₁ × … × C_r`, stacked block-diagonally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cone {
    parts: Vec<ConeSpec>,
    dim: usize,
}

impl Cone {
    pub fn product(parts: Vec<ConeSpec>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("empty product cone".into()));
        }
        let dim = parts.iter().map(|p| p.dim).sum();
        Ok(Self { parts, dim })
    }

    pub fn single(spec: ConeSpec) -> Self {
        Self {
            dim: spec.dim,
            parts: vec![spec],
        }
    }

    pub fn orthant(dim: usize) -> Result<Self> {
        ConeSpec::new(ConeKind::NonnegativeOrthant, dim).map(Self::single)
    }

    pub fn second_order(dim: usize) -> Result<Self> {
        ConeSpec::new(ConeKind::SecondOrderCone, dim).map(Self::single)
    }

    pub fn zero(dim: usize) -> Result<Self> {
        ConeSpec::new(ConeKind::ZeroCone, dim).map(Self::single)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parts(&self) -> &[ConeSpec] {
        &self.parts
    }

    /// Whether every factor is a nonnegative orthant.
    pub fn is_orthant(&self) -> bool {
        self.parts
            .iter()
            .all(|p| p.kind == ConeKind::NonnegativeOrthant)
    }

    /// `Π(y)`, the Euclidean projection onto the dual cone `C*`.
    pub fn project_dual(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, y.len())?;
        let mut out = vec![0.0; y.len()];
        let mut start = 0;
        for part in &self.parts {
            let end = start + part.dim;
            part.project_dual_into(&y[start..end], &mut out[start..end]);
            start = end;
        }
        Ok(out)
    }

    /// `Π₋C(y) = y − Π(y)`.
    pub fn project_neg(&self, y: &[f64]) -> Result<Vec<f64>> {
        let p = self.project_dual(y)?;
        Ok(y.iter().zip(&p).map(|(a, b)| a - b).collect())
    }

    pub fn dual_contains(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.dim {
            return false;
        }
        let mut start = 0;
        self.parts.iter().all(|part| {
            let end = start + part.dim;
            let ok = part.dual_contains(&y[start..end], tol);
            start = end;
            ok
        })
    }
}

/// The closed ball `𝔅_μ` of radius `μ` around the origin. `μ = ∞` disables clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualBall {
    radius: f64,
}

impl DualBall {
    pub fn new(radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be >= 0, got {radius}"
            )));
        }
        Ok(Self { radius })
    }

    pub fn unbounded() -> Self {
        Self {
            radius: f64::INFINITY,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `P_μ(y) = min(1, μ/‖y‖)·y`. Points inside the ball are returned unchanged.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let n = norm(y);
        if n <= self.radius {
            y.to_vec()
        } else if y.len() == 1 {
            // exact clamp; the radial scale can land one ulp outside
            vec![self.radius.copysign(y[0])]
        } else {
            let s = self.radius / n;
            y.iter().map(|v| v * s).collect()
        }
    }
}

pub fn project_dual_cone(cone: &Cone, y: &[f64]) -> Result<Vec<f64>> {
    cone.project_dual(y)
}

pub fn project_neg_cone(cone: &Cone, y: &[f64]) -> Result<Vec<f64>> {
    cone.project_neg(y)
}

pub fn project_ball(ball: &DualBall, y: &[f64]) -> Vec<f64> {
    ball.project(y)
}
