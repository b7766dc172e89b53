use serde::{Deserialize, Serialize};

use super::interval::{bootstrap_ci, wilson_ci, IntervalEstimate};
use crate::error::{Error, Result};

/// Per-arm success rate and episode contrast with confidence intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub arm: String,
    pub n: usize,
    pub success_rate: IntervalEstimate<f64>,
    /// `None` when no episode in the arm had a defined contrast.
    pub contrast_mean: Option<IntervalEstimate<f64>>,
    /// Per-episode contrast; `None` where the contrast was undefined.
    pub raw_contrasts: Vec<Option<f64>>,
    pub raw_successes: Vec<bool>,
}

impl GroupReport {
    pub fn from_episodes(
        arm: impl Into<String>,
        successes: Vec<bool>,
        contrasts: Vec<Option<f64>>,
        n_boot: usize,
        level: f64,
        seed: u64,
    ) -> Result<Self> {
        if successes.len() != contrasts.len() {
            return Err(Error::DimensionMismatch {
                expected: successes.len(),
                got: contrasts.len(),
            });
        }
        let n = successes.len();
        let k = successes.iter().filter(|&&s| s).count();
        let success_rate = wilson_ci(k as u64, n as u64, level)?;
        let defined: Vec<f64> = contrasts.iter().flatten().copied().collect();
        let contrast_mean = if defined.is_empty() {
            None
        } else {
            Some(bootstrap_ci(&defined, n_boot, level, seed)?)
        };
        Ok(Self {
            arm: arm.into(),
            n,
            success_rate,
            contrast_mean,
            raw_contrasts: contrasts,
            raw_successes: successes,
        })
    }

    pub fn successes(&self) -> usize {
        self.raw_successes.iter().filter(|&&s| s).count()
    }

    pub fn mean_contrast(&self) -> Option<f64> {
        self.contrast_mean.map(|c| c.point)
    }

    pub fn check(&self) -> Result<()> {
        if self.n != self.raw_contrasts.len() || self.n != self.raw_successes.len() {
            return Err(Error::invalid(format!(
                "arm `{}`: n = {} but {} contrasts / {} outcomes",
                self.arm,
                self.n,
                self.raw_contrasts.len(),
                self.raw_successes.len()
            )));
        }
        Ok(())
    }
}
