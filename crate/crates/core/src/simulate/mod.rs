//! Exact path sampling of `X^n`, plain and exponentially tilted.
//!
//! The chain jumps by `l` at rate `n F_l(X/n)`. Under the tilt by a control
//! `g` the rate of `l` at time `t` becomes `n F_l(X/n) exp(c g_t . l)` with
//! `c = a_n / n`, and the likelihood ratio of the tilted law is
//!
//! `log w = sum_jumps c g_tau . l - int sum_l n F_l(X_s/n) (exp(c g_s . l) - 1) ds`.
//!
//! The compensator integral is exact: rates are constant between jumps and
//! `g` is linear on each grid cell.

mod domination;
mod engine;
mod kurtz;
mod observer;
mod path;

pub use domination::{coupled_domination, yule_domination_constants, CoupledRun, DominationConstants};
pub use engine::{Mode, RunSummary, Simulator, TiltTable, DEFAULT_RATE_CAP};
pub use kurtz::{kurtz_time_change, kurtz_time_change_detailed, KurtzDetail};
pub use observer::{EndpointObserver, GridObserver, PathObserver, RecordingObserver, WeightTracker};
pub use path::{fluctuation, FluctuationPath, TrajectoryPath, WeightedSample};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fluid::{FluidError, TiltControl};
use crate::model::ValidatedModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scale n must be at least 1")]
    BadScale,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("alpha must lie in (1/2, 1), got {0}")]
    BadAlpha(f64),
    #[error("control dimension {got} does not match the model ({expected})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("control grid does not cover [0, {0}]")]
    GridMismatch(f64),
    #[error("total rate {rate:e} exceeds the cap at t = {t}")]
    RateOverflow { t: f64, rate: f64 },
    #[error("state {state:?} left nG at t = {t}")]
    LeftDomain { t: f64, state: Vec<i64> },
    #[error("start state {0:?} is not in nG")]
    StartOutsideDomain(Vec<i64>),
    #[error("tilted rate exceeded the thinning bound at t = {0}")]
    ThinningBoundExceeded(f64),
    #[error("log weight became non-finite at t = {0}")]
    NonfiniteWeight(f64),
    #[error("sum_l |l|_1 F_l(x) / |x|_1 appears unbounded on the domain (ratio {0:e})")]
    UnboundedRatio(f64),
    #[error("domination coupling failed at t = {t}: {reason}")]
    DominationViolated { t: f64, reason: String },
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

/// Replicate stream: ChaCha8 keyed by `seed`, one independent stream per
/// `stream` index. Replicate results do not depend on execution order.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `a_n = n^alpha`.
pub fn scaling(n: u64, alpha: f64) -> f64 {
    (n as f64).powf(alpha)
}

pub fn check_alpha(alpha: f64) -> Result<(), SimError> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(SimError::BadAlpha(alpha))
    }
}

/// One exact path of `X^n` on `[0, t_end]`.
pub fn gillespie(model: &ValidatedModel, n: u64, t_end: f64, seed: u64) -> Result<TrajectoryPath, SimError> {
    let sim = Simulator::new(model, n, t_end)?;
    let mut rec = RecordingObserver::new(n, t_end);
    sim.run(&mut replicate_rng(seed, 0), Mode::Plain, &mut rec)?;
    Ok(rec.into_path())
}

/// A path sampled under the tilt by `g`, with its log likelihood ratio.
pub fn tilted_simulate(
    model: &ValidatedModel,
    n: u64,
    t_end: f64,
    g: &TiltControl,
    alpha: f64,
    seed: u64,
) -> Result<WeightedSample, SimError> {
    let sim = Simulator::new(model, n, t_end)?;
    let table = TiltTable::new(model, g, n, alpha)?;
    let mut rec = RecordingObserver::new(n, t_end);
    sim.run(&mut replicate_rng(seed, 0), Mode::Tilted(&table), &mut rec)?;
    Ok(rec.into_weighted())
}

/// An untilted path together with the martingale `log w_T(g)` along it.
pub fn weighted_simulate(
    model: &ValidatedModel,
    n: u64,
    t_end: f64,
    g: &TiltControl,
    alpha: f64,
    seed: u64,
) -> Result<WeightedSample, SimError> {
    let sim = Simulator::new(model, n, t_end)?;
    let table = TiltTable::new(model, g, n, alpha)?;
    let mut rec = RecordingObserver::new(n, t_end);
    sim.run(&mut replicate_rng(seed, 0), Mode::Weighted(&table), &mut rec)?;
    Ok(rec.into_weighted())
}
