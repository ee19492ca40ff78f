use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `alpha0 / (k + 1)`: divergent sum, summable squares.
    Harmonic,
    Constant,
    /// Constant, but a step that would leave the feasible set is retried with
    /// a smaller retained step instead of being projected.
    ShrinkOnViolation,
}

/// Step sizes for the iterative solvers. Every kind can be shrunk (the NBS
/// solver shrinks whenever an iterate would lose individual rationality);
/// the shrink is retained for all later iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub alpha0: f64,
    #[serde(default = "default_shrink_factor")]
    pub shrink_factor: f64,
    #[serde(default = "default_underflow")]
    pub underflow: f64,
    #[serde(skip, default = "one")]
    scale: f64,
}

fn default_shrink_factor() -> f64 {
    0.1
}

fn default_underflow() -> f64 {
    1e-12
}

fn one() -> f64 {
    1.0
}

impl StepSchedule {
    pub fn new(kind: ScheduleKind, alpha0: f64) -> Self {
        Self {
            kind,
            alpha0,
            shrink_factor: default_shrink_factor(),
            underflow: default_underflow(),
            scale: 1.0,
        }
    }

    pub fn harmonic(alpha0: f64) -> Self {
        Self::new(ScheduleKind::Harmonic, alpha0)
    }

    pub fn constant(alpha0: f64) -> Self {
        Self::new(ScheduleKind::Constant, alpha0)
    }

    pub fn shrink_on_violation(alpha0: f64) -> Self {
        Self::new(ScheduleKind::ShrinkOnViolation, alpha0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return Err(Error::InvalidArgument("alpha0 must be positive".into()));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::InvalidArgument("shrink_factor must lie in (0, 1)".into()));
        }
        if !(self.underflow > 0.0) {
            return Err(Error::InvalidArgument("underflow must be positive".into()));
        }
        Ok(())
    }

    pub fn value(&self, k: usize) -> f64 {
        let base = match self.kind {
            ScheduleKind::Harmonic => self.alpha0 / (k as f64 + 1.0),
            ScheduleKind::Constant | ScheduleKind::ShrinkOnViolation => self.alpha0,
        };
        base * self.scale
    }

    /// Multiplies the retained scale by `shrink_factor`.
    pub fn shrink(&mut self) {
        self.scale *= self.shrink_factor;
    }

    pub fn underflowed(&self, k: usize) -> bool {
        self.value(k) < self.underflow
    }

    /// Restores the unshrunk schedule.
    pub fn reset(&mut self) {
        self.scale = 1.0;
    }
}

pub fn step_schedule_value(schedule: &StepSchedule, k: usize) -> f64 {
    schedule.value(k)
}
