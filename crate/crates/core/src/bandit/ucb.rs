use serde::{Deserialize, Serialize};

use super::model::Posterior;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    /// Fixed exploration coefficient.
    Constant,
    /// `sqrt(lambda) * B + sqrt(4 ln(t / delta) + 2 log det(I + K / lambda))`.
    Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerForm {
    /// Information gain of the new samples given the samples held at the
    /// last synchronization.
    Conditional,
    /// Ratio against the new samples taken on their own.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcbParams {
    pub alpha: f64,
    pub schedule: AlphaSchedule,
    /// Norm bound used by the confidence schedule.
    pub norm_bound: f64,
    /// Failure probability used by the confidence schedule.
    pub delta: f64,
    /// Sync threshold; larger values synchronize less often.
    pub sync_threshold: f64,
    pub trigger: TriggerForm,
    /// Per-BS sample capacity.
    pub capacity: usize,
}

impl Default for UcbParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            schedule: AlphaSchedule::Constant,
            norm_bound: 1.0,
            delta: 0.05,
            sync_threshold: 30.0,
            trigger: TriggerForm::Conditional,
            capacity: 512,
        }
    }
}

impl UcbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("ucb.alpha", "must be finite and >= 0"));
        }
        if !(self.sync_threshold >= 0.0) {
            return Err(Error::config("ucb.sync_threshold", "must be >= 0"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("ucb.delta", "must lie in (0, 1)"));
        }
        if !(self.norm_bound >= 0.0 && self.norm_bound.is_finite()) {
            return Err(Error::config("ucb.norm_bound", "must be finite and >= 0"));
        }
        if self.capacity == 0 {
            return Err(Error::config("ucb.capacity", "must be >= 1"));
        }
        Ok(())
    }

    /// Exploration coefficient at period `t` given the store's
    /// `log det(I + K / lambda)`.
    pub fn alpha_at(&self, t: u64, log_det: f64, lambda_k: f64) -> f64 {
        match self.schedule {
            AlphaSchedule::Constant => self.alpha,
            AlphaSchedule::Confidence => {
                let t = (t.max(1)) as f64;
                lambda_k.sqrt() * self.norm_bound + (4.0 * (t / self.delta).ln() + 2.0 * log_det).max(0.0).sqrt()
            }
        }
    }
}

pub fn ucb_score(posterior: &Posterior, alpha: f64) -> f64 {
    posterior.mean + alpha * posterior.deviation
}

/// Arm with the highest score; ties go to the lowest arm id.
pub fn ucb_select(scores: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(arm, score) in scores {
        best = match best {
            None => Some((arm, score)),
            Some((b, s)) if score > s || (score == s && arm < b) => Some((arm, score)),
            keep => keep,
        };
    }
    best.map(|(arm, _)| arm)
}

/// Whether `elapsed * gain > threshold`.
pub fn trigger_fires(elapsed: u64, gain: f64, threshold: f64) -> bool {
    elapsed as f64 * gain > threshold
}
