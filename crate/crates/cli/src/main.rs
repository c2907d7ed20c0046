//! `ddmc`: command-line front end for simulating density-dependent Markov
//! chains and checking their fluid, diffusion and moderate-deviation limits.
//!
//! Every failure ends stderr with a line `error code=<n> kind=<kind>`:
//! 2 unreadable or malformed input, 3 validation, 4 runtime,
//! 5 singular sigma under `rate --method closed`.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ddmc", version, about = "Density-dependent Markov chain toolkit")]
pub struct Cli {
    /// Master seed; overrides the experiment config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for CSV outputs and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Grid step; overrides the experiment config.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one exact path of X^n, optionally under a constant tilt.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        /// Constant tilt g applied to every coordinate.
        #[arg(long)]
        tilt: Option<f64>,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
    },
    /// Solve the fluid ODE and the covariance equation.
    Fluid {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
    },
    /// Evaluate the rate functional on a path given as `t,f_1..f_d`.
    Rate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Closed)]
        method: Method,
        /// Tent functions per coordinate for `variational`.
        #[arg(long, default_value_t = 32)]
        basis: usize,
        #[arg(long, default_value_t = 2)]
        sweeps: usize,
    },
    /// Run an experiment config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a model or experiment config without running anything.
    #[command(group(ArgGroup::new("input").required(true).args(["model", "config"])))]
    Validate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Closed,
    Degenerate,
    /// Lower bound from a finite control basis.
    Variational,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DDMC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code == 0 {
                return ExitCode::SUCCESS;
            }
            eprintln!("error code=2 kind=usage");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ddmc: {e}");
            eprintln!("error code={} kind={}", e.code(), e.kind());
            ExitCode::from(e.code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Validation(vec!["--threads must be at least 1".into()]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(CliError::runtime)?;
    }
    if let Some(h) = cli.h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Validation(vec![format!("--h must be positive, got {h}")]));
        }
    }
    commands::dispatch(&cli)
}
