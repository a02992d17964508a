use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup to `peak`, a constant hold, then exponential decay that
/// halves the rate every `half_life_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub peak: f64,
    pub warmup_steps: u64,
    pub hold_steps: u64,
    pub half_life_steps: f64,
}

impl Default for LrSchedule {
    /// 2e-3 reached after 20k steps, held for 50k, then halved every 50k.
    fn default() -> Self {
        LrSchedule {
            peak: 2e-3,
            warmup_steps: 20_000,
            hold_steps: 50_000,
            half_life_steps: 50_000.0,
        }
    }
}

impl LrSchedule {
    /// 4e-3 held constant until step 100k, used with audio and video dropout.
    pub fn two_modality_dropout() -> Self {
        LrSchedule {
            peak: 4e-3,
            warmup_steps: 20_000,
            hold_steps: 80_000,
            half_life_steps: 50_000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak > 0.0 && self.peak.is_finite()) || !(self.half_life_steps > 0.0) {
            return Err(Error::ConfigError(format!("invalid learning-rate schedule {self:?}")));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        if step < self.warmup_steps {
            return self.peak * step as f64 / self.warmup_steps as f64;
        }
        let knee = self.warmup_steps + self.hold_steps;
        if step <= knee {
            return self.peak;
        }
        self.peak * 0.5f64.powf((step - knee) as f64 / self.half_life_steps)
    }
}
