//! Stochastic primal-dual coordinate iterations for convex programs with
//! nonlinear cone constraints
//!
//! ```text
//! min G(u) + Σᵢ Jᵢ(uᵢ)   s.t.   Θ(u) = Σᵢ Θᵢ(uᵢ) ∈ −C,   uᵢ ∈ Uᵢ,
//! ```
//!
//! with `C` a product of nonnegative orthants, second-order cones and zero cones.
//! The solver works on the augmented Lagrangian and supports a deterministic
//! full-update variant for comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod auglag;
pub mod cones;
pub mod diagnostics;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod selfcheck;
pub mod solver;
pub mod tolerances;

pub use auglag::AugLagParams;
pub use cones::{Cone, ConeKind, ConeSpec, DualBall};
pub use error::{Error, Result};
pub use model::{BlockLayout, BlockModel, BlockVector, ProblemSpec, SaddlePoint};
pub use solver::{run_appal, run_spdc, SolveOutput, SolverConfig, StepSchedule};
