use ddmc::experiments::ExperimentError;
use ddmc::fluid::FluidError;
use ddmc::model::{ConfigError, ModelError};
use ddmc::ratefn::RateError;
use ddmc::simulate::SimError;
use thiserror::Error;

/// Every failure carries the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input: config, flags or path CSV.
    #[error("{0}")]
    Parse(String),
    #[error("validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}; use --method degenerate for singular sigma")]
    SigmaSingular(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime(_) => 4,
            CliError::SigmaSingular(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Validation(_) => "validation",
            CliError::Runtime(_) => "runtime",
            CliError::SigmaSingular(_) => "sigma_singular",
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Model(m) => CliError::Validation(vec![m.to_string()]),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<Vec<ModelError>> for CliError {
    fn from(errs: Vec<ModelError>) -> Self {
        CliError::Validation(errs.iter().map(ToString::to_string).collect())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Parse(m) => CliError::Parse(m),
            ExperimentError::Invalid(v) => CliError::Validation(v),
            ExperimentError::ModelConfig(c) => c.into(),
            ExperimentError::Model(v) => v.into(),
            other => CliError::runtime(other),
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::SigmaSingular { .. } => CliError::SigmaSingular(e.to_string()),
            RateError::GridMismatch
            | RateError::DimensionMismatch
            | RateError::NonzeroStart(_)
            | RateError::NonFinite
            | RateError::InvalidArgument(_) => CliError::Validation(vec![e.to_string()]),
            other => CliError::runtime(other),
        }
    }
}

impl From<FluidError> for CliError {
    fn from(e: FluidError) -> Self {
        match e {
            FluidError::BadStep { .. } | FluidError::ParamsOutOfRange(_) => CliError::Validation(vec![e.to_string()]),
            other => CliError::runtime(other),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::BadScale | SimError::BadHorizon(_) | SimError::BadAlpha(_) | SimError::StartOutsideDomain(_) => {
                CliError::Validation(vec![e.to_string()])
            }
            other => CliError::runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::runtime(e)
    }
}
