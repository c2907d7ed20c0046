//! Experiment configuration files.
//!
//! ```toml
//! experiment = "mdp"
//! t0 = 1.0
//! n_list = [1000, 10000]
//! alpha = 0.75
//! reps = 2000
//! seed = 7
//! h = 0.01
//!
//! [model]
//! builtin = "yule"
//!
//! [event]
//! kind = "endpoint_exceed"
//! coordinate = 0
//! level = 1.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::fluid::{Grid, TiltControl};
use crate::model::{validate_model, ModelConfig, ValidatedModel};

/// Sample points used when validating the model of an experiment.
const VALIDATION_SAMPLES: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lln,
    Clt,
    Mdp,
    Martingale,
    PoissonTail,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Lln => "lln",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Mdp => "mdp",
            ExperimentKind::Martingale => "martingale",
            ExperimentKind::PoissonTail => "poisson_tail",
        }
    }
}

/// Rare event on the fluctuation `theta = (X^n - n X) / a_n`, checked at the
/// grid points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// `theta_{T0}[coordinate] >= level`
    EndpointExceed { coordinate: usize, level: f64 },
    /// `max_k |theta_{t_k}|_inf >= level`
    SupnormExceed { level: f64 },
}

impl EventSpec {
    pub fn level(&self) -> f64 {
        match self {
            EventSpec::EndpointExceed { level, .. } | EventSpec::SupnormExceed { level } => *level,
        }
    }
}

/// Control `g` for the martingale check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TiltSpec {
    Zero,
    Constant { value: Vec<f64> },
    /// `g_t = amplitude sin(2 pi periods t / T0)` in every coordinate.
    Sine { amplitude: f64, periods: f64 },
}

impl TiltSpec {
    pub fn control(&self, grid: Grid, dim: usize) -> Result<TiltControl, ExperimentError> {
        match self {
            TiltSpec::Zero => Ok(TiltControl::zeros(grid, dim)),
            TiltSpec::Constant { value } => {
                if value.len() != dim {
                    return Err(ExperimentError::Invalid(vec![format!(
                        "tilt has {} components, model dimension is {dim}",
                        value.len()
                    )]));
                }
                Ok(TiltControl::constant(grid, value))
            }
            TiltSpec::Sine { amplitude, periods } => {
                let t_end = grid.t_end();
                let (a, p) = (*amplitude, *periods);
                TiltControl::from_fn(grid, dim, |t| vec![a * (std::f64::consts::TAU * p * t / t_end).sin(); dim])
                    .map_err(Into::into)
            }
        }
    }
}

fn default_t0() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    0.75
}

fn default_h() -> f64 {
    0.01
}

fn default_tolerance() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Not needed by `poisson_tail`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default = "default_t0")]
    pub t0: f64,
    pub n_list: Vec<u64>,
    /// `a_n = n^alpha`
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventSpec>,
    /// Thresholds for `lln`; defaults to `[0.05]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<TiltSpec>,
    /// `mdp`: also run the untilted estimator.
    #[serde(default)]
    pub naive: bool,
    /// Relative slack of the `mdp` comparison with the reference rate.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut bad = Vec::new();
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            bad.push(format!("alpha must lie in (1/2, 1), got {}", self.alpha));
        }
        if self.reps < 100 {
            bad.push(format!("reps must be at least 100, got {}", self.reps));
        }
        if self.n_list.is_empty() {
            bad.push("n_list is empty".to_string());
        }
        if self.n_list.contains(&0) {
            bad.push("n_list entries must be positive".to_string());
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            bad.push(format!("t0 must be positive, got {}", self.t0));
        } else if let Err(e) = self.grid() {
            bad.push(e.to_string());
        }
        if !(self.tolerance > 0.0) {
            bad.push(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if let Some(eps) = &self.epsilons {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
                bad.push("epsilons must be a non-empty list of positive numbers".to_string());
            }
        }
        if let Some(ev) = &self.event {
            if !(ev.level() >= 0.0 && ev.level().is_finite()) {
                bad.push(format!("event level must be finite and non-negative, got {}", ev.level()));
            }
        }
        match self.experiment {
            ExperimentKind::PoissonTail => {
                for (name, v) in [("delta", self.delta), ("t1", self.t1)] {
                    if let Some(v) = v {
                        if !(v > 0.0 && v.is_finite()) {
                            bad.push(format!("{name} must be positive, got {v}"));
                        }
                    }
                }
            }
            kind => {
                if self.model.is_none() {
                    bad.push(format!("experiment `{}` needs a [model] table", kind.as_str()));
                }
                if kind == ExperimentKind::Mdp && self.event.is_none() {
                    bad.push("experiment `mdp` needs an [event] table".to_string());
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Invalid(bad))
        }
    }

    pub fn grid(&self) -> Result<Grid, ExperimentError> {
        Grid::with_step(self.t0, self.h).map_err(Into::into)
    }

    pub fn validated_model(&self) -> Result<ValidatedModel, ExperimentError> {
        let cfg = self
            .model
            .as_ref()
            .ok_or_else(|| ExperimentError::Invalid(vec!["missing [model] table".to_string()]))?;
        validate_model(cfg.to_spec()?, VALIDATION_SAMPLES).map_err(ExperimentError::Model)
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.epsilons.clone().unwrap_or_else(|| vec![0.05])
    }
}
