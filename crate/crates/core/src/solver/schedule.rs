use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `εᵏ = scale / (offset + k)^alpha` with `alpha ∈ (½, 1)` and `offset ≥ 1`.
    PowerLaw { alpha: f64, scale: f64, offset: f64 },
    /// A fixed nonincreasing sequence, one entry per iteration.
    Explicit { steps: Vec<f64> },
    /// A single constant step, as used by the deterministic full-update method.
    Constant { step: f64 },
}

/// A nonincreasing step sequence bounded by `cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    kind: ScheduleKind,
    cap: f64,
}

impl StepSchedule {
    pub fn power_law(alpha: f64, scale: f64, offset: f64, cap: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0.5, 1), got {alpha}"
            )));
        }
        if !(offset >= 1.0) || !offset.is_finite() {
            return Err(Error::Config(format!("offset must be >= 1, got {offset}")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("scale must be > 0, got {scale}")));
        }
        let s = Self {
            kind: ScheduleKind::PowerLaw {
                alpha,
                scale,
                offset,
            },
            cap,
        };
        s.check_first(cap)?;
        Ok(s)
    }

    /// Power law whose first step is `fraction · cap`.
    pub fn power_law_scaled(alpha: f64, offset: f64, fraction: f64, cap: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Config(format!(
                "step fraction must lie in (0, 1), got {fraction}"
            )));
        }
        if !cap.is_finite() {
            return Err(Error::Config(
                "an unbounded step cap needs an explicit scale".into(),
            ));
        }
        Self::power_law(alpha, fraction * cap * offset.powf(alpha), offset, cap)
    }

    pub fn explicit(steps: Vec<f64>, cap: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Config("explicit schedule is empty".into()));
        }
        if steps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("explicit steps must be > 0".into()));
        }
        if steps.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("explicit steps must be nonincreasing".into()));
        }
        let s = Self {
            kind: ScheduleKind::Explicit { steps },
            cap,
        };
        s.check_first(cap)?;
        Ok(s)
    }

    pub fn constant(step: f64, cap: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Config(format!("step must be > 0, got {step}")));
        }
        let s = Self {
            kind: ScheduleKind::Constant { step },
            cap,
        };
        s.check_first(cap)?;
        Ok(s)
    }

    fn check_first(&self, cap: f64) -> Result<()> {
        let first = self.first();
        if !(first < cap) {
            return Err(Error::Config(format!(
                "first step {first} is not below the step bound {cap}"
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn first(&self) -> f64 {
        self.at(0)
    }

    /// `εᵏ`. Explicit schedules repeat their last entry past the end.
    pub fn at(&self, k: u64) -> f64 {
        match &self.kind {
            ScheduleKind::PowerLaw {
                alpha,
                scale,
                offset,
            } => scale / (offset + k as f64).powf(*alpha),
            ScheduleKind::Explicit { steps } => {
                let idx = (k as usize).min(steps.len() - 1);
                steps[idx]
            }
            ScheduleKind::Constant { step } => *step,
        }
    }

    /// Whether the explicit sequence covers `0..=last`.
    pub fn covers(&self, last: u64) -> bool {
        match &self.kind {
            ScheduleKind::Explicit { steps } => (last as usize) < steps.len(),
            _ => true,
        }
    }
}
