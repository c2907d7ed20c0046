use super::{replicates, stream_id, ExperimentConfig, ExperimentError, ResultRow};
use crate::fluid::{solve_fluid, solve_lyapunov, TiltControl};
use crate::model::ValidatedModel;
use crate::simulate::{replicate_rng, scaling, EndpointObserver, GridObserver, Mode, Simulator, TiltTable};
use crate::stats::{effective_sample_size, ks_test_normal, linear_regression, mean_stderr, sample_variance, KahanSum};

/// Frequency of `sup_k |X^n_{t_k}/n - X_{t_k}|_1 > epsilon`.
#[derive(Clone, Debug, PartialEq)]
pub struct LlnRow {
    pub n: u64,
    pub epsilon: f64,
    pub frequency: f64,
    pub stderr: f64,
}

/// Least-squares fit of `log frequency` against `n` over the rows with a
/// non-zero frequency. Needs three such rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LlnTrend {
    pub epsilon: f64,
    pub points: usize,
    pub slope: Option<f64>,
    /// One-sided p-value against a negative slope.
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlnReport {
    pub model: String,
    pub rows: Vec<LlnRow>,
    pub trends: Vec<LlnTrend>,
}

impl LlnReport {
    pub fn result_rows(&self) -> Vec<ResultRow> {
        self.rows
            .iter()
            .map(|r| ResultRow {
                experiment: "lln".into(),
                model: self.model.clone(),
                n: r.n,
                a_n: None,
                alpha: None,
                params: vec![("epsilon".into(), r.epsilon)],
                estimate: r.frequency,
                stderr: r.stderr,
                ess: None,
                reference: None,
                scaled_log: (r.frequency > 0.0).then(|| -r.frequency.ln() / r.n as f64),
            })
            .collect()
    }
}

pub fn lln_check(config: &ExperimentConfig) -> Result<LlnReport, ExperimentError> {
    let model = config.validated_model()?;
    let fluid = solve_fluid(&model, config.t0, config.h)?;
    let d = model.dimension();
    let eps = config.epsilons();
    let mut rows = Vec::new();
    for (i, &n) in config.n_list.iter().enumerate() {
        let sim = Simulator::new(&model, n, config.t0)?;
        let nf = n as f64;
        let sups = replicates(config.reps, |r| {
            let mut obs = GridObserver::new(fluid.grid().clone(), d);
            sim.run(&mut replicate_rng(config.seed, stream_id(r, i, 0)), Mode::Plain, &mut obs)?;
            Ok(obs
                .states()
                .zip(fluid.x())
                .map(|(s, x)| s.iter().zip(x.iter()).map(|(&si, xi)| (si as f64 / nf - xi).abs()).sum::<f64>())
                .fold(0.0, f64::max))
        })?;
        for &e in &eps {
            let hits = sups.iter().filter(|&&s| s > e).count();
            let p = hits as f64 / config.reps as f64;
            rows.push(LlnRow {
                n,
                epsilon: e,
                frequency: p,
                stderr: (p * (1.0 - p) / config.reps as f64).sqrt(),
            });
        }
    }
    let trends = eps
        .iter()
        .map(|&e| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.epsilon == e && r.frequency > 0.0)
                .map(|r| (r.n as f64, r.frequency.ln()))
                .unzip();
            let fit = linear_regression(&x, &y).ok();
            LlnTrend {
                epsilon: e,
                points: x.len(),
                slope: fit.map(|f| f.slope),
                p_value: fit.map(|f| f.p_negative),
            }
        })
        .collect();
    Ok(LlnReport {
        model: model.name().to_string(),
        rows,
        trends,
    })
}

/// Fluctuation `(X^n_{T0} - n X_{T0}) / sqrt(n)` in one coordinate,
/// standardised by the limiting variance and tested against `N(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CltRow {
    pub n: u64,
    pub coordinate: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `variance`, from the sample fourth moment.
    pub variance_stderr: f64,
    pub reference_variance: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CltReport {
    pub model: String,
    pub rows: Vec<CltRow>,
}

impl CltReport {
    pub fn result_rows(&self) -> Vec<ResultRow> {
        self.rows
            .iter()
            .map(|r| ResultRow {
                experiment: "clt".into(),
                model: self.model.clone(),
                n: r.n,
                a_n: Some((r.n as f64).sqrt()),
                alpha: None,
                params: vec![
                    ("coordinate".into(), r.coordinate as f64),
                    ("ks_statistic".into(), r.ks_statistic),
                    ("ks_p_value".into(), r.ks_p_value),
                ],
                estimate: r.variance,
                stderr: r.variance_stderr,
                ess: None,
                reference: Some(r.reference_variance),
                scaled_log: None,
            })
            .collect()
    }
}

pub fn clt_check(config: &ExperimentConfig) -> Result<CltReport, ExperimentError> {
    let model = config.validated_model()?;
    let fluid = solve_lyapunov(solve_fluid(&model, config.t0, config.h)?)?;
    let cov = fluid.terminal_covariance()?.clone();
    let d = model.dimension();
    let scale = (0..d).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    for i in 0..d {
        if !(cov[(i, i)] > 1e-12 * scale) {
            return Err(ExperimentError::SingularCovariance {
                coordinate: i,
                variance: cov[(i, i)],
            });
        }
    }
    let x_end = fluid.x_final().clone();
    let mut rows = Vec::new();
    for (k, &n) in config.n_list.iter().enumerate() {
        let sim = Simulator::new(&model, n, config.t0)?;
        let nf = n as f64;
        let finals = replicates(config.reps, |r| {
            let mut obs = EndpointObserver::default();
            sim.run(&mut replicate_rng(config.seed, stream_id(r, k, 0)), Mode::Plain, &mut obs)?;
            Ok(obs.state)
        })?;
        for i in 0..d {
            let y: Vec<f64> = finals.iter().map(|s| (s[i] as f64 - nf * x_end[i]) / nf.sqrt()).collect();
            let (mean, _) = mean_stderr(&y);
            let variance = sample_variance(&y);
            let m4 = y.iter().map(|v| (v - mean).powi(4)).collect::<KahanSum>().value() / y.len() as f64;
            let sd = cov[(i, i)].sqrt();
            let z: Vec<f64> = y.iter().map(|v| v / sd).collect();
            let ks = ks_test_normal(&z)?;
            rows.push(CltRow {
                n,
                coordinate: i,
                mean,
                variance,
                variance_stderr: ((m4 - variance * variance).max(0.0) / y.len() as f64).sqrt(),
                reference_variance: cov[(i, i)],
                ks_statistic: ks.statistic,
                ks_p_value: ks.p_value,
            });
        }
    }
    Ok(CltReport {
        model: model.name().to_string(),
        rows,
    })
}

/// Sample mean of `w_T(g)` over untilted paths.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleRow {
    pub model: String,
    pub n: u64,
    pub a_n: f64,
    pub alpha: f64,
    pub sup_g: f64,
    pub mean: f64,
    pub stderr: f64,
    pub ess: f64,
}

impl MartingaleRow {
    pub fn result_row(&self) -> ResultRow {
        ResultRow {
            experiment: "martingale".into(),
            model: self.model.clone(),
            n: self.n,
            a_n: Some(self.a_n),
            alpha: Some(self.alpha),
            params: vec![("sup_g".into(), self.sup_g)],
            estimate: self.mean,
            stderr: self.stderr,
            ess: Some(self.ess),
            reference: Some(1.0),
            scaled_log: None,
        }
    }
}

/// Mean and standard error of `w_{T0}(g)` over `reps` untilted paths on
/// `[0, T0]`, `T0` being the end of the control grid.
pub fn martingale_mean_check(
    model: &ValidatedModel,
    n: u64,
    g: &TiltControl,
    alpha: f64,
    reps: u64,
    seed: u64,
) -> Result<MartingaleRow, ExperimentError> {
    martingale_row(model, n, g, alpha, reps, seed, 0)
}

pub(crate) fn martingale_row(
    model: &ValidatedModel,
    n: u64,
    g: &TiltControl,
    alpha: f64,
    reps: u64,
    seed: u64,
    n_index: usize,
) -> Result<MartingaleRow, ExperimentError> {
    let sim = Simulator::new(model, n, g.grid().t_end())?;
    let table = TiltTable::new(model, g, n, alpha)?;
    let w = replicates(reps, |r| {
        let mut obs = EndpointObserver::default();
        let s = sim.run(&mut replicate_rng(seed, stream_id(r, n_index, 2)), Mode::Weighted(&table), &mut obs)?;
        Ok(s.log_weight.exp())
    })?;
    let (mean, stderr) = mean_stderr(&w);
    Ok(MartingaleRow {
        model: model.name().to_string(),
        n,
        a_n: scaling(n, alpha),
        alpha,
        sup_g: g.sup_norm(),
        mean,
        stderr,
        ess: effective_sample_size(&w),
    })
}
