use serde::{Deserialize, Serialize};

use crate::error::{BiclError, Result};

/// Logistic ramp of the alignment penalty weight over episodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub c: f64,
    pub beta_sched: f64,
    pub h: u64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            c: 10.0,
            beta_sched: 2e-3,
            h: 3000,
        }
    }
}

impl PenaltySchedule {
    pub fn new(c: f64, beta_sched: f64, h: u64) -> Result<Self> {
        let s = Self { c, beta_sched, h };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(BiclError::Config(format!("penalty amplitude c = {} must be finite and >= 0", self.c)));
        }
        if !(self.beta_sched.is_finite() && self.beta_sched > 0.0) {
            return Err(BiclError::Config(format!("schedule slope {} must be > 0", self.beta_sched)));
        }
        Ok(())
    }

    /// `c / (1 + exp(-beta_sched * (k - h)))`.
    pub fn ck_at(&self, k: u64) -> f64 {
        let z = -self.beta_sched * (k as f64 - self.h as f64);
        self.c / (1.0 + z.exp())
    }
}
