use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ddmc::experiments::{run_experiment, write_results_csv, ExperimentConfig};
use ddmc::fluid::{solve_fluid, solve_fluid_on, solve_lyapunov, Grid, TiltControl};
use ddmc::model::{parse_model_config, validate_model, ValidatedModel};
use ddmc::ratefn::{rate_closed_form, rate_degenerate, variational_sup, CandidatePath};
use ddmc::simulate::{gillespie, tilted_simulate};
use nalgebra::DVector;

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::{Cli, Command, Method};

/// Points sampled when validating a model's rates and domain.
const VALIDATION_SAMPLES: usize = 1000;
const DEFAULT_H: f64 = 1e-3;

/// Collects outputs of one command; the manifest goes last.
struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    fn new(cli: &Cli, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(&cli.out_dir)?;
        let mut manifest = RunManifest::new(command);
        manifest.seed = cli.seed;
        if let Some(t) = cli.threads {
            manifest.flag("threads", t);
        }
        Ok(Self {
            dir: cli.out_dir.clone(),
            manifest,
            started: Instant::now(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.config.insert(path.display().to_string(), text.clone());
        Ok(text)
    }

    fn output(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, buf)?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.manifest.duration_seconds = self.started.elapsed().as_secs_f64();
        let path = self.manifest.write_atomic(&self.dir)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { model, n, t0, tilt, alpha } => simulate(cli, model, *n, *t0, *tilt, *alpha),
        Command::Fluid { model, t0 } => fluid(cli, model, *t0),
        Command::Rate {
            model,
            path,
            method,
            basis,
            sweeps,
        } => rate(cli, model, path, *method, *basis, *sweeps),
        Command::Experiment { config } => experiment(cli, config),
        Command::Validate { model, config } => validate(model.as_deref(), config.as_deref()),
    }
}

fn load_model(text: &str) -> Result<ValidatedModel, CliError> {
    let spec = parse_model_config(text)?.to_spec()?;
    Ok(validate_model(spec, VALIDATION_SAMPLES)?)
}

fn simulate(cli: &Cli, model: &Path, n: u64, t0: f64, tilt: Option<f64>, alpha: f64) -> Result<(), CliError> {
    let mut run = Run::new(cli, "simulate")?;
    let m = load_model(&run.input(model)?)?;
    let seed = cli.seed.unwrap_or(0);
    run.manifest.seed = Some(seed);
    run.manifest.flag("n", n);
    run.manifest.flag("t0", t0);
    let events = match tilt {
        None => {
            let path = gillespie(&m, n, t0, seed)?;
            run.output("trajectory.csv", |w| path.write_csv(w))?;
            path.num_jumps()
        }
        Some(g) => {
            let h = cli.h.unwrap_or(DEFAULT_H);
            run.manifest.flag("tilt", g);
            run.manifest.flag("alpha", alpha);
            run.manifest.flag("h", h);
            let control = TiltControl::constant(Grid::with_step(t0, h)?, &vec![g; m.dimension()]);
            let sample = tilted_simulate(&m, n, t0, &control, alpha, seed)?;
            run.output("trajectory.csv", |w| sample.write_csv(w))?;
            println!("log_weight {}", sample.log_weight);
            sample.path.num_jumps()
        }
    };
    println!("events {events}");
    run.finish()
}

fn fluid(cli: &Cli, model: &Path, t0: f64) -> Result<(), CliError> {
    let mut run = Run::new(cli, "fluid")?;
    let m = load_model(&run.input(model)?)?;
    let h = cli.h.unwrap_or(DEFAULT_H);
    run.manifest.flag("t0", t0);
    run.manifest.flag("h", h);
    let fl = solve_lyapunov(solve_fluid(&m, t0, h)?)?;
    run.output("fluid.csv", |w| fl.write_csv(w))?;
    let x = fl.x_final();
    run.output("fluid_final.csv", |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=x.len()).map(|i| format!("X_{i}")));
        out.write_record(&header)?;
        let mut row = vec![t0.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        out.write_record(&row)?;
        out.flush()?;
        Ok(())
    })?;
    let shown: Vec<String> = x.iter().map(ToString::to_string).collect();
    println!("X({t0}) = [{}]", shown.join(", "));
    run.finish()
}

/// Reads `t,f_1..f_d` on a uniform grid starting at 0.
fn read_path(text: &str, dim: usize, h: Option<f64>) -> Result<CandidatePath, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse(format!("path CSV: {e}")))?;
        let line = i + 2;
        let nums = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Parse(format!("path CSV line {line}: {e}")))?;
        if nums.len() != dim + 1 {
            return Err(CliError::Validation(vec![format!(
                "path CSV line {line}: expected {} columns for dimension {dim}, got {}",
                dim + 1,
                nums.len()
            )]));
        }
        times.push(nums[0]);
        values.push(DVector::from_column_slice(&nums[1..]));
    }
    if times.len() < 3 || times[0] != 0.0 {
        return Err(CliError::Validation(vec![
            "path needs at least 3 rows starting at t = 0".into()
        ]));
    }
    let t_end = *times.last().unwrap();
    let grid = Grid::with_steps(t_end, times.len() - 1)?;
    let tol = 1e-9 * t_end.max(1.0);
    if let Some(k) = (0..times.len()).find(|&k| (times[k] - grid.time(k)).abs() > tol) {
        return Err(CliError::Validation(vec![format!("path times are not uniform at row {}", k + 2)]));
    }
    if let Some(h) = h {
        if (h - grid.h()).abs() > tol {
            return Err(CliError::Validation(vec![format!("--h {h} differs from the path step {}", grid.h())]));
        }
    }
    Ok(CandidatePath::new(grid, values, None)?)
}

fn rate(cli: &Cli, model: &Path, path: &Path, method: Method, basis: usize, sweeps: usize) -> Result<(), CliError> {
    let mut run = Run::new(cli, "rate")?;
    let m = load_model(&run.input(model)?)?;
    let f = read_path(&run.input(path)?, m.dimension(), cli.h)?;
    run.manifest.flag("method", format!("{method:?}").to_lowercase());
    let fl = solve_fluid_on(&m, f.grid().clone())?;
    let report = match method {
        Method::Closed => rate_closed_form(&fl, &f)?,
        Method::Degenerate => rate_degenerate(&fl, &f)?,
        Method::Variational => {
            run.manifest.flag("basis", basis);
            run.manifest.flag("sweeps", sweeps);
            variational_sup(&fl, &f, basis, sweeps)?
        }
    };
    run.output("rate_summary.csv", |w| report.write_summary_csv(w))?;
    run.output("rate_psi.csv", |w| report.write_psi_csv(w))?;
    println!("I(f) = {} ({})", report.value.as_f64(), report.method);
    run.finish()
}

fn experiment(cli: &Cli, config: &Path) -> Result<(), CliError> {
    let mut run = Run::new(cli, "experiment")?;
    let mut c = ExperimentConfig::from_toml_str(&run.input(config)?)?;
    // flags win over the file
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(h) = cli.h {
        c.h = h;
    }
    run.manifest.seed = Some(c.seed);
    run.manifest.flag("h", c.h);
    c.validate()?;
    let report = run_experiment(&c)?;
    let rows = report.rows();
    run.output("results.csv", |w| write_results_csv(&rows, w))?;
    println!("{} rows", rows.len());
    run.finish()
}

fn validate(model: Option<&Path>, config: Option<&Path>) -> Result<(), CliError> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", p.display())));
    if let Some(p) = model {
        let m = load_model(&read(p)?)?;
        println!("model {}: dimension {}, {} jumps", m.name(), m.dimension(), m.num_jumps());
    }
    if let Some(p) = config {
        let c = ExperimentConfig::from_toml_str(&read(p)?)?;
        c.validate()?;
        if c.model.is_some() {
            c.validated_model()?;
        }
        println!("experiment {}: ok", c.experiment.as_str());
    }
    Ok(())
}
