use rand::Rng;
use rand_distr::Exp1;

use super::{replicate_rng, PathObserver, RecordingObserver, SimError, Simulator};
use crate::model::{ValidatedModel, DOMAIN_TOL};

/// Internal clocks of the random time change at the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct KurtzDetail {
    /// `n int_0^T F_l(X_s/n) ds` per jump.
    pub integrated: Vec<f64>,
    /// Arrival times of each unit Poisson stream that were consumed; the
    /// number of arrivals up to `integrated[l]` is the jump count of `l`.
    pub arrivals: Vec<Vec<f64>>,
    /// First unused arrival per stream, beyond `integrated[l]`.
    pub next_arrival: Vec<f64>,
}

pub fn kurtz_time_change(
    model: &ValidatedModel,
    n: u64,
    t_end: f64,
    seed: u64,
) -> Result<super::TrajectoryPath, SimError> {
    Ok(kurtz_time_change_detailed(model, n, t_end, seed)?.0)
}

pub fn kurtz_time_change_detailed(
    model: &ValidatedModel,
    n: u64,
    t_end: f64,
    seed: u64,
) -> Result<(super::TrajectoryPath, KurtzDetail), SimError> {
    let sim = Simulator::new(model, n, t_end)?;
    let mut rec = RecordingObserver::new(n, t_end);
    let detail = run_time_change(&sim, &mut replicate_rng(seed, 0), &mut rec)?;
    Ok((rec.into_path(), detail))
}

/// Next-reaction form of `X_t = X_0 + sum_l l beta_l(n int_0^t F_l ds)` with
/// independent unit-rate Poisson processes `beta_l`.
pub(crate) fn run_time_change<R: Rng + ?Sized, O: PathObserver>(
    sim: &Simulator,
    rng: &mut R,
    obs: &mut O,
) -> Result<KurtzDetail, SimError> {
    let model = sim.model();
    let nf = sim.n() as f64;
    let num_jumps = model.num_jumps();
    let jumps = model.jumps();
    let mut state = sim.start_state().to_vec();
    let mut x = vec![0.0; model.dimension()];
    let mut rates = vec![0.0; num_jumps];
    let mut internal = vec![0.0; num_jumps];
    let mut next: Vec<f64> = (0..num_jumps).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let mut arrivals = vec![Vec::new(); num_jumps];
    let mut t = 0.0;
    obs.start(&state);
    loop {
        for (xi, &s) in x.iter_mut().zip(&state) {
            *xi = s as f64 / nf;
        }
        model.rates_into(&x, &mut rates);
        let mut total = 0.0;
        for r in rates.iter_mut() {
            *r = r.max(0.0) * nf;
            total += *r;
        }
        if !(total <= super::DEFAULT_RATE_CAP) {
            return Err(SimError::RateOverflow { t, rate: total });
        }
        let mut best: Option<(usize, f64)> = None;
        for l in 0..num_jumps {
            if rates[l] > 0.0 {
                let wait = (next[l] - internal[l]) / rates[l];
                if best.is_none_or(|(_, w)| wait < w) {
                    best = Some((l, wait));
                }
            }
        }
        let Some((l, wait)) = best.filter(|&(_, w)| t + w < sim.t_end()) else {
            let dt = sim.t_end() - t;
            for (i, r) in internal.iter_mut().zip(&rates) {
                *i += r * dt;
            }
            break;
        };
        t += wait;
        for (i, r) in internal.iter_mut().zip(&rates) {
            *i += r * wait;
        }
        // the fired clock sits exactly on its arrival
        internal[l] = next[l];
        arrivals[l].push(next[l]);
        next[l] += rng.sample::<f64, _>(Exp1);
        for (s, dl) in state.iter_mut().zip(&jumps[l]) {
            *s += dl;
        }
        if !model.domain().contains_scaled(&state, nf, DOMAIN_TOL) {
            return Err(SimError::LeftDomain { t, state });
        }
        obs.jump(t, l, &state, 0.0);
    }
    obs.finish(sim.t_end(), &state, 0.0);
    Ok(KurtzDetail {
        integrated: internal,
        arrivals,
        next_arrival: next,
    })
}
