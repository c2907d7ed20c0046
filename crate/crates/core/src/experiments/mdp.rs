use super::{replicates, stream_id, EventSpec, ExperimentConfig, ExperimentError, ResultRow};
use crate::fluid::{solve_fluid, solve_lyapunov, FluidSolution, TiltControl};
use crate::ratefn::endpoint_min_cost_at;
use crate::simulate::{replicate_rng, scaling, EndpointObserver, GridObserver, Mode, Simulator, TiltTable, WeightTracker};
use crate::stats::{effective_sample_size, mean_stderr};

/// Rows whose effective sample size falls below this are flagged.
pub const MIN_ESS: f64 = 30.0;

/// Cheapest way into an event: the target time index `k` and fluctuation
/// value `z` at `t_k`, and the cost `inf I` over the event.
#[derive(Clone, Debug, PartialEq)]
pub struct EventTarget {
    pub k: usize,
    pub time: f64,
    pub z: Vec<f64>,
    pub reference_rate: f64,
}

/// For `theta_i(t_k) >= r` the minimiser of `z^T Sigma^{-1} z / 2` subject
/// to `z_i = r` is `z = r Sigma e_i / Sigma_ii` with cost `r^2 / (2 Sigma_ii)`.
/// A sup-norm event takes the cheapest `(k, i)` and the positive sign; the
/// negative one costs the same.
pub fn event_reference(fluid: &FluidSolution, event: &EventSpec) -> Result<EventTarget, ExperimentError> {
    let cov = fluid.sigma_ou().ok_or(crate::fluid::FluidError::MissingCovariance)?;
    let d = fluid.dimension();
    let steps = fluid.grid().steps();
    let (k, i) = match *event {
        EventSpec::EndpointExceed { coordinate, .. } => {
            if coordinate >= d {
                return Err(ExperimentError::Invalid(vec![format!(
                    "event coordinate {coordinate} out of range for dimension {d}"
                )]));
            }
            (steps, coordinate)
        }
        EventSpec::SupnormExceed { .. } => {
            let mut best = (steps, 0, f64::NEG_INFINITY);
            for (k, c) in cov.iter().enumerate().skip(1) {
                for i in 0..d {
                    if c[(i, i)] > best.2 {
                        best = (k, i, c[(i, i)]);
                    }
                }
            }
            (best.0, best.1)
        }
    };
    let c = &cov[k];
    let var = c[(i, i)];
    if !(var > 0.0) {
        return Err(ExperimentError::SingularCovariance { coordinate: i, variance: var });
    }
    let r = event.level();
    Ok(EventTarget {
        k,
        time: fluid.grid().time(k),
        z: (0..d).map(|j| r * c[(j, i)] / var).collect(),
        reference_rate: r * r / (2.0 * var),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRow {
    pub n: u64,
    pub a_n: f64,
    pub p_hat: f64,
    pub stderr: f64,
    /// `-(n / a_n^2) log p_hat`
    pub minus_log_scaled: f64,
    pub reference_rate: f64,
    pub ess: f64,
    /// `ess < MIN_ESS`: the estimate is unreliable.
    pub degenerate: bool,
}

impl EstimateRow {
    fn new(n: u64, a_n: f64, weights: &[f64], reference_rate: f64) -> Self {
        let (p_hat, stderr) = mean_stderr(weights);
        let ess = effective_sample_size(weights);
        Self {
            n,
            a_n,
            p_hat,
            stderr,
            minus_log_scaled: -(n as f64 / (a_n * a_n)) * p_hat.ln(),
            reference_rate,
            ess,
            degenerate: ess < MIN_ESS,
        }
    }

    /// `(minus_log_scaled - reference) / reference`
    pub fn relative_error(&self) -> f64 {
        (self.minus_log_scaled - self.reference_rate) / self.reference_rate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpReport {
    pub model: String,
    pub alpha: f64,
    pub event: EventSpec,
    pub target: EventTarget,
    pub tolerance: f64,
    pub tilted: Vec<EstimateRow>,
    /// Untilted estimates, when requested.
    pub naive: Vec<EstimateRow>,
}

impl MdpReport {
    pub fn result_rows(&self) -> Vec<ResultRow> {
        let row = |name: &str, r: &EstimateRow| ResultRow {
            experiment: name.into(),
            model: self.model.clone(),
            n: r.n,
            a_n: Some(r.a_n),
            alpha: Some(self.alpha),
            params: vec![
                ("level".into(), self.event.level()),
                ("target_time".into(), self.target.time),
                ("degenerate".into(), f64::from(u8::from(r.degenerate))),
            ],
            estimate: r.p_hat,
            stderr: r.stderr,
            ess: Some(r.ess),
            reference: Some(r.reference_rate),
            scaled_log: Some(r.minus_log_scaled),
        };
        let mut rows: Vec<ResultRow> = self.tilted.iter().map(|r| row("mdp", r)).collect();
        rows.extend(self.naive.iter().map(|r| row("mdp_naive", r)));
        rows
    }
}

/// Importance-sampling estimates of `P(theta^n in event)`, tilting by the
/// optimal control of the cheapest path into the event.
pub fn mdp_estimate(config: &ExperimentConfig) -> Result<MdpReport, ExperimentError> {
    let event = config
        .event
        .clone()
        .ok_or_else(|| ExperimentError::Invalid(vec!["experiment `mdp` needs an [event] table".into()]))?;
    let model = config.validated_model()?;
    let fluid = solve_lyapunov(solve_fluid(&model, config.t0, config.h)?)?;
    let target = event_reference(&fluid, &event)?;
    let d = model.dimension();
    let g = if target.reference_rate == 0.0 {
        TiltControl::zeros(fluid.grid().clone(), d)
    } else {
        let (_, report) = endpoint_min_cost_at(&fluid, target.k, &target.z)?;
        report.tilt().expect("finite endpoint cost carries psi")
    };
    // a sup-norm event has two mirror-image minimisers; sample from the even
    // mixture of both tilts and weight by the mixture likelihood ratio
    let components = match event {
        EventSpec::EndpointExceed { .. } => vec![g],
        EventSpec::SupnormExceed { .. } => {
            let minus = g.scaled(-1.0);
            vec![g, minus]
        }
    };
    let mut tilted = Vec::with_capacity(config.n_list.len());
    let mut naive = Vec::new();
    for (i, &n) in config.n_list.iter().enumerate() {
        let a_n = scaling(n, config.alpha);
        let sim = Simulator::new(&model, n, config.t0)?;
        let tables = components
            .iter()
            .map(|c| TiltTable::new(&model, c, n, config.alpha))
            .collect::<Result<Vec<_>, _>>()?;
        let hit = Hit::new(&event, &fluid, n, a_n);
        let weights = replicates(config.reps, |r| {
            let mut rng = replicate_rng(config.seed, stream_id(r, i, 0));
            let table = &tables[r as usize % tables.len()];
            let (inside, lw) = match event {
                EventSpec::EndpointExceed { .. } => {
                    let mut obs = EndpointObserver::default();
                    let s = sim.run(&mut rng, Mode::Tilted(table), &mut obs)?;
                    (hit.endpoint(&obs.state), s.log_weight)
                }
                EventSpec::SupnormExceed { .. } => {
                    let trackers: Vec<WeightTracker> = tables.iter().map(|t| WeightTracker::new(&model, t, n)).collect();
                    let mut obs = (GridObserver::new(fluid.grid().clone(), d), trackers);
                    sim.run(&mut rng, Mode::Tilted(table), &mut obs)?;
                    let lws: Vec<f64> = obs.1.iter().map(|t| t.log_weight).collect();
                    (hit.sup(obs.0.states()), log_mean_exp(&lws))
                }
            };
            Ok(if inside { (-lw).exp() } else { 0.0 })
        })?;
        let row = EstimateRow::new(n, a_n, &weights, target.reference_rate);
        if row.degenerate {
            log::warn!("n = {n}: effective sample size {:.1} below {MIN_ESS}", row.ess);
        }
        tilted.push(row);
        if config.naive {
            let hits = replicates(config.reps, |r| {
                let mut rng = replicate_rng(config.seed, stream_id(r, i, 1));
                let inside = match event {
                    EventSpec::EndpointExceed { .. } => {
                        let mut obs = EndpointObserver::default();
                        sim.run(&mut rng, Mode::Plain, &mut obs)?;
                        hit.endpoint(&obs.state)
                    }
                    EventSpec::SupnormExceed { .. } => {
                        let mut obs = GridObserver::new(fluid.grid().clone(), d);
                        sim.run(&mut rng, Mode::Plain, &mut obs)?;
                        hit.sup(obs.states())
                    }
                };
                Ok(f64::from(u8::from(inside)))
            })?;
            naive.push(EstimateRow::new(n, a_n, &hits, target.reference_rate));
        }
    }
    Ok(MdpReport {
        model: model.name().to_string(),
        alpha: config.alpha,
        event,
        target,
        tolerance: config.tolerance,
        tilted,
        naive,
    })
}

struct Hit<'a> {
    event: &'a EventSpec,
    fluid: &'a FluidSolution,
    nf: f64,
    a_n: f64,
}

impl<'a> Hit<'a> {
    fn new(event: &'a EventSpec, fluid: &'a FluidSolution, n: u64, a_n: f64) -> Self {
        Self {
            event,
            fluid,
            nf: n as f64,
            a_n,
        }
    }

    fn endpoint(&self, state: &[i64]) -> bool {
        let EventSpec::EndpointExceed { coordinate, level } = *self.event else {
            return false;
        };
        let x = self.fluid.x_final()[coordinate];
        (state[coordinate] as f64 - self.nf * x) / self.a_n >= level
    }

    fn sup<'s>(&self, states: impl Iterator<Item = &'s [i64]>) -> bool {
        let level = self.event.level();
        states.zip(self.fluid.x()).any(|(s, x)| {
            s.iter()
                .zip(x.iter())
                .any(|(&si, xi)| (si as f64 - self.nf * xi).abs() / self.a_n >= level)
        })
    }
}

/// `log(mean(exp(v)))` without overflow.
fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / v.len() as f64).ln()
}
