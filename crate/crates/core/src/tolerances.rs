//! Numerical tolerances shared by the library, the self-check suite and the tests.

/// Moreau decomposition residual, relative to `1 + ‖y‖`.
pub const MOREAU_RESIDUAL: f64 = 1e-12;

/// Orthogonality of the two Moreau parts, relative to `1 + ‖y‖²`.
pub const MOREAU_ORTHOGONALITY: f64 = 1e-10;

/// Slack for the variational characterization and the three-point projection inequality.
pub const PROJECTION_INEQUALITY: f64 = 1e-10;

/// `‖x̄‖` at or below this value is treated as the cone axis.
pub const SOC_AXIS: f64 = 1e-300;

/// Additivity of `J` and `Θ` against per-block sums (relative).
pub const ADDITIVITY: f64 = 1e-12;

/// Finite-difference gradient agreement (relative).
pub const FINITE_DIFFERENCE: f64 = 1e-5;

/// Points closer than this to a projection kink are excluded from finite-difference checks.
pub const KINK_EXCLUSION: f64 = 1e-6;

/// Block-subproblem minimizers against a golden-section oracle.
pub const BLOCK_ORACLE: f64 = 1e-6;

/// Dual iterate must stay in `C* ∩ 𝔅_μ` up to this slack.
pub const DUAL_FEASIBILITY: f64 = 1e-12;

/// Trajectory agreement for structural reductions.
pub const TRAJECTORY: f64 = 1e-12;

/// Slack for the augmented-Lagrangian inequalities.
pub const GAP_BOUND_SLACK: f64 = 1e-8;

/// Saddle-point residuals of stored reference solutions.
pub const SADDLE_RESIDUAL: f64 = 1e-10;

/// Metric values below this are clipped before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-16;

/// Upper limit on the stationarity probe step.
pub const STATIONARITY_STEP: f64 = 1e-3;

/// Rounding allowance when comparing the Lyapunov value with its lower bound; both
/// sides vanish at the saddle point and the value is a sum of cancelling terms.
pub const LYAPUNOV_ROUNDING: f64 = 1e-12;
