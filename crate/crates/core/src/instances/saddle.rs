//! Small problems whose saddle points are known in closed form.

use std::sync::Arc;

use ndarray::Array2;

use crate::auglag::DualBoundInput;
use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm, norm_sq, sub};
use crate::model::{BlockLayout, BlockVector, ConstraintBlock, ProblemSpec, SaddlePoint, Smooth};
use crate::rng::Rng;

/// `min ½‖u − a‖²  s.t.  ⟨c, u⟩ ≤ d`.
///
/// `p* = max(0, (⟨c, a⟩ − d)/‖c‖²)` and `u* = a − p* c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSaddle {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
    pub u_star: Vec<f64>,
    pub p_star: f64,
}

impl SyntheticSaddle {
    pub fn new(a: Vec<f64>, c: Vec<f64>, d: f64) -> Result<Self> {
        check_len(a.len(), c.len())?;
        let cc = norm_sq(&c);
        if !(cc > 0.0) {
            return Err(Error::InvalidArgument("c must be nonzero".into()));
        }
        let p_star = ((dot(&c, &a) - d) / cc).max(0.0);
        let mut u_star = a.clone();
        axpy(-p_star, &c, &mut u_star);
        Ok(Self {
            a,
            c,
            d,
            u_star,
            p_star,
        })
    }

    /// Random instance with an active constraint:
    /// `d = ⟨c, a⟩ − (0.5 + U)‖c‖²`, `U ~ Uniform[0, 1)`, hence `p* ∈ [0.5, 1.5)`.
    pub fn generate(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        let mut rng = Rng::seed_from_u64(seed);
        let a = rng.normal_vec(dim);
        let mut c = rng.normal_vec(dim);
        while norm(&c) == 0.0 {
            c = rng.normal_vec(dim);
        }
        let d = dot(&c, &a) - (0.5 + rng.uniform()) * norm_sq(&c);
        Self::new(a, c, d)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn problem_spec(&self, blocks: usize) -> Result<ProblemSpec> {
        let layout = BlockLayout::equal(self.dim(), blocks)?;
        let constraints = (0..blocks)
            .map(|i| {
                let row = self.c[layout.range(i)].to_vec();
                let m = Array2::from_shape_vec((1, row.len()), row).expect("1 x n_i");
                ConstraintBlock::Linear(Arc::new(m))
            })
            .collect();
        ProblemSpec::builder(layout, Cone::orthant(1)?)
            .smooth(
                Smooth::ShiftedQuadratic {
                    center: self.a.clone(),
                },
                1.0,
            )
            .constraints(constraints)
            .constraint_offset(vec![-self.d])
            .constraint_lipschitz(norm(&self.c))
            .build()
    }

    pub fn saddle_point(&self, layout: Arc<BlockLayout>) -> Result<SaddlePoint> {
        Ok(SaddlePoint {
            u: BlockVector::from_flat(layout, self.u_star.clone())?,
            p: vec![self.p_star],
        })
    }

    pub fn optimal_value(&self) -> f64 {
        0.5 * norm_sq(&sub(&self.u_star, &self.a))
    }

    /// Largest violation among stationarity, primal and dual feasibility and
    /// complementarity at `(u*, p*)`.
    pub fn kkt_residual(&self) -> f64 {
        let mut stat = sub(&self.u_star, &self.a);
        axpy(self.p_star, &self.c, &mut stat);
        let slack = dot(&self.c, &self.u_star) - self.d;
        norm(&stat)
            .max(slack.max(0.0))
            .max((-self.p_star).max(0.0))
            .max((self.p_star * slack).abs())
    }

    /// `û = u* − c/‖c‖²`, which satisfies `⟨c, û⟩ − d ≤ −1`.
    pub fn slater_input(&self) -> DualBoundInput {
        let mut point = self.u_star.clone();
        axpy(-1.0 / norm_sq(&self.c), &self.c, &mut point);
        let theta = dot(&self.c, &point) - self.d;
        DualBoundInput {
            slater_point: point,
            objective_lower_bound: 0.0,
            constraint_at_slater: vec![theta],
            soc_norm_index: None,
        }
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        0.5 * norm_sq(&sub(u, &self.a))
    }
}

/// `min ½‖u − a‖²  s.t.  u ∈ K` with `K` the second-order cone, written as
/// `Θ(u) = −u ∈ −K`.
///
/// `u* = Π_K(a)` and `p* = Π_K(a) − a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocSaddle {
    pub a: Vec<f64>,
    pub u_star: Vec<f64>,
    pub p_star: Vec<f64>,
}

impl SocSaddle {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        let cone = Cone::second_order(a.len())?;
        let u_star = cone.project_dual(&a)?;
        let p_star = sub(&u_star, &a);
        Ok(Self { a, u_star, p_star })
    }

    /// Random `a` whose projection lies on the boundary of the cone, away from the apex.
    pub fn generate(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(
                "second-order cone needs dimension >= 2".into(),
            ));
        }
        let mut rng = Rng::seed_from_u64(seed);
        let mut tail = rng.normal_vec(dim - 1);
        while norm(&tail) == 0.0 {
            tail = rng.normal_vec(dim - 1);
        }
        let head = rng.uniform_in(-0.8, 0.8) * norm(&tail);
        let mut a = vec![head];
        a.extend(tail);
        Self::new(a)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// The cone couples all coordinates, so the constraint is `−I` restricted to each block.
    pub fn problem_spec(&self, blocks: usize) -> Result<ProblemSpec> {
        let n = self.dim();
        let layout = BlockLayout::equal(n, blocks)?;
        let constraints = (0..blocks)
            .map(|i| {
                let r = layout.range(i);
                let m = Array2::from_shape_fn((n, r.len()), |(row, col)| {
                    if row == r.start + col {
                        -1.0
                    } else {
                        0.0
                    }
                });
                ConstraintBlock::Linear(Arc::new(m))
            })
            .collect();
        ProblemSpec::builder(layout, Cone::second_order(n)?)
            .smooth(
                Smooth::ShiftedQuadratic {
                    center: self.a.clone(),
                },
                1.0,
            )
            .constraints(constraints)
            .constraint_lipschitz(1.0)
            .build()
    }

    pub fn saddle_point(&self, layout: Arc<BlockLayout>) -> Result<SaddlePoint> {
        Ok(SaddlePoint {
            u: BlockVector::from_flat(layout, self.u_star.clone())?,
            p: self.p_star.clone(),
        })
    }

    pub fn optimal_value(&self) -> f64 {
        0.5 * norm_sq(&self.p_star)
    }

    /// `û = (1, 0, …, 0)`, strictly inside the cone with margin 1.
    pub fn slater_input(&self) -> DualBoundInput {
        let mut point = vec![0.0; self.dim()];
        point[0] = 1.0;
        let theta = point.iter().map(|x| -x).collect();
        DualBoundInput {
            slater_point: point,
            objective_lower_bound: 0.0,
            constraint_at_slater: theta,
            soc_norm_index: Some(2.0),
        }
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        0.5 * norm_sq(&sub(u, &self.a))
    }
}
