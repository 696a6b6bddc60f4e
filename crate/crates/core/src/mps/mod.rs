//! Tensor-network propagation: TEBD with a mobile cavity site, and the
//! Ehrenfest mean-field engine built on the same sweep.

mod chain;
mod checkpoint;
mod ehrenfest;
mod tebd;

pub use chain::{Mps, SiteKind, Sweep, Truncation, TwoSiteGate};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use ehrenfest::{EhrenfestEngine, EhrenfestState};
pub use tebd::{evolve_tebd, initial_mps, MpsEngine, MpsObservables, StepReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::linalg::LinalgError;
use crate::model::{HtcParams, ModelError};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("state violates excitation-number conservation")]
    ChargeViolation,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite tensor entries")]
    NonFinite,

    #[error("discarded weight {weight:e} in one step exceeds the alarm threshold {threshold:e}; increase chi_max")]
    TruncationAlarm { weight: f64, threshold: f64 },

    #[error("invalid evolution config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type MpsResult<T> = Result<T, MpsError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrotterOrder {
    #[default]
    Second,
    /// Suzuki composition of five second-order steps.
    Fourth,
}

/// What happens when one step discards more weight than `alarm_weight`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmPolicy {
    /// Count the event and continue.
    #[default]
    Warn,
    Abort,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub chi_max: usize,
    #[serde(default = "default_svd_cutoff")]
    pub svd_cutoff: f64,
    #[serde(default)]
    pub ehrenfest_mode: bool,
    #[serde(default)]
    pub order: TrotterOrder,
    #[serde(default = "default_alarm_weight")]
    pub alarm_weight: f64,
    #[serde(default)]
    pub alarm_policy: AlarmPolicy,
}

fn default_svd_cutoff() -> f64 {
    1e-10
}

fn default_alarm_weight() -> f64 {
    1e-8
}

impl EvolutionConfig {
    /// `dt = (2π/ν)/400` up to one vibrational period at `χ = 64`.
    pub fn for_params(params: &HtcParams) -> Self {
        let period = params.vibrational_period();
        Self {
            dt: period / 400.0,
            t_final: period,
            chi_max: 64,
            svd_cutoff: default_svd_cutoff(),
            ehrenfest_mode: false,
            order: TrotterOrder::Second,
            alarm_weight: default_alarm_weight(),
            alarm_policy: AlarmPolicy::Warn,
        }
    }

    pub fn with_steps_per_period(mut self, params: &HtcParams, steps: usize) -> Self {
        self.dt = params.vibrational_period() / steps as f64;
        self
    }

    pub fn validate(&self) -> MpsResult<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(MpsError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.svd_cutoff >= 0.0) {
            return Err(MpsError::Config(format!("svd_cutoff must be >= 0, got {}", self.svd_cutoff)));
        }
        if self.chi_max == 0 {
            return Err(MpsError::Config("chi_max must be positive".into()));
        }
        if !(self.t_final >= 0.0) {
            return Err(MpsError::Config(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        Ok(())
    }

    pub fn truncation(&self) -> Truncation {
        Truncation { chi_max: self.chi_max, svd_cutoff: self.svd_cutoff }
    }

    /// Number of steps to reach `t`, the last one possibly shorter.
    pub fn steps_to(&self, t: f64) -> usize {
        (t / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}
