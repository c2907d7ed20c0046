//! Monte Carlo harness for the limit theorems: law of large numbers, the
//! Gaussian fluctuation limit, moderate-deviation estimates by importance
//! sampling, the exponential martingale and the Poisson sup bound.
//!
//! Replicates run in parallel, are collected in replicate order and reduced
//! sequentially with compensated sums, so results do not depend on the
//! number of worker threads.

mod checks;
mod config;
mod mdp;
mod poisson;

pub use checks::{clt_check, lln_check, martingale_mean_check, CltReport, CltRow, LlnReport, LlnRow, LlnTrend, MartingaleRow};
pub use config::{EventSpec, ExperimentConfig, ExperimentKind, TiltSpec};
pub use mdp::{event_reference, mdp_estimate, EstimateRow, EventTarget, MdpReport, MIN_ESS};
pub use poisson::{poisson_sup_frequency, poisson_tail_exponent, PoissonTail, PoissonTailRow};

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::fluid::FluidError;
use crate::model::{ConfigError, ModelError};
use crate::ratefn::RateError;
use crate::simulate::SimError;
use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid experiment config: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    ModelConfig(#[from] ConfigError),
    #[error("invalid model: {}", join_errors(.0))]
    Model(Vec<ModelError>),
    #[error("fluctuation covariance of coordinate {coordinate} is singular ({variance:e})")]
    SingularCovariance { coordinate: usize, variance: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn join_errors(errs: &[ModelError]) -> String {
    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// Replicate stream index: replicate, position in `n_list` and a variant tag
/// (tilted, naive, ...) packed into disjoint bit ranges.
pub fn stream_id(rep: u64, n_index: usize, variant: u64) -> u64 {
    rep | ((n_index as u64) << 40) | (variant << 56)
}

/// Runs `f` for every replicate in parallel and returns the results in
/// replicate order. The first failing replicate (by index) wins.
pub(crate) fn replicates<T, F>(reps: u64, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, SimError> + Sync + Send,
{
    let out: Vec<Result<T, SimError>> = (0..reps).into_par_iter().map(f).collect();
    out.into_iter().collect::<Result<Vec<_>, _>>().map_err(Into::into)
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub model: String,
    pub n: u64,
    pub a_n: Option<f64>,
    pub alpha: Option<f64>,
    /// Experiment-specific columns, written between `alpha` and `estimate`.
    pub params: Vec<(String, f64)>,
    pub estimate: f64,
    pub stderr: f64,
    pub ess: Option<f64>,
    pub reference: Option<f64>,
    pub scaled_log: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes rows as CSV. Parameter columns are taken from the first row; all
/// rows must carry the same parameter names.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<&str> = rows.first().map(|r| r.params.iter().map(|(k, _)| k.as_str()).collect()).unwrap_or_default();
    let mut header = vec!["experiment", "model", "n", "a_n", "alpha"];
    header.extend(&names);
    header.extend(["estimate", "stderr", "ess", "reference", "scaled_log"]);
    w.write_record(&header)?;
    for r in rows {
        debug_assert!(r.params.iter().map(|(k, _)| k.as_str()).eq(names.iter().copied()));
        let mut rec = vec![r.experiment.clone(), r.model.clone(), r.n.to_string(), opt(r.a_n), opt(r.alpha)];
        rec.extend(r.params.iter().map(|(_, v)| v.to_string()));
        rec.extend([
            r.estimate.to_string(),
            r.stderr.to_string(),
            opt(r.ess),
            opt(r.reference),
            opt(r.scaled_log),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Output of [`run_experiment`].
#[derive(Clone, Debug)]
pub enum ExperimentReport {
    Lln(LlnReport),
    Clt(CltReport),
    Mdp(MdpReport),
    Martingale(Vec<MartingaleRow>),
    PoissonTail(Vec<PoissonTailRow>),
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<ResultRow> {
        match self {
            ExperimentReport::Lln(r) => r.result_rows(),
            ExperimentReport::Clt(r) => r.result_rows(),
            ExperimentReport::Mdp(r) => r.result_rows(),
            ExperimentReport::Martingale(rows) => rows.iter().map(MartingaleRow::result_row).collect(),
            ExperimentReport::PoissonTail(rows) => rows.iter().map(PoissonTailRow::result_row).collect(),
        }
    }
}

/// Validates `config` and runs the experiment it names.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    Ok(match config.experiment {
        ExperimentKind::Lln => ExperimentReport::Lln(lln_check(config)?),
        ExperimentKind::Clt => ExperimentReport::Clt(clt_check(config)?),
        ExperimentKind::Mdp => ExperimentReport::Mdp(mdp_estimate(config)?),
        ExperimentKind::Martingale => {
            let model = config.validated_model()?;
            let tilt = config.tilt.clone().unwrap_or(TiltSpec::Zero);
            let g = tilt.control(config.grid()?, model.dimension())?;
            let mut rows = Vec::with_capacity(config.n_list.len());
            for (i, &n) in config.n_list.iter().enumerate() {
                rows.push(checks::martingale_row(&model, n, &g, config.alpha, config.reps, config.seed, i)?);
            }
            ExperimentReport::Martingale(rows)
        }
        ExperimentKind::PoissonTail => {
            let (delta, t1) = (config.delta.unwrap_or(1.0), config.t1.unwrap_or(1.0));
            let mut rows = Vec::with_capacity(config.n_list.len());
            for (i, &n) in config.n_list.iter().enumerate() {
                rows.push(poisson_sup_frequency(delta, t1, n, config.reps, config.seed, i)?);
            }
            ExperimentReport::PoissonTail(rows)
        }
    })
}

#[cfg(test)]
mod tests;
