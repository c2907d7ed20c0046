use rand::Rng;
use rand_distr::Exp1;

use super::{replicates, stream_id, ExperimentError, ResultRow};
use crate::simulate::replicate_rng;

/// Chernoff exponents for the centred unit Poisson process
/// `beta(s) - s` on `[0, n T1]` leaving the band `[-n delta, n delta]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonTail {
    /// `log(1 + delta / T1)`
    pub theta_star: f64,
    /// `sup_theta [delta theta - T1 (e^theta - theta - 1)]`
    pub upper: f64,
    /// `-log(1 - delta / T1)`; infinite for `delta >= T1`.
    pub theta_lower: f64,
    /// `sup_theta [delta theta + T1 (1 - theta - e^{-theta})]`; infinite for
    /// `delta > T1`, when the lower excursion is impossible.
    pub lower: f64,
    /// Half the smaller of the two exponents.
    pub k12: f64,
}

pub fn poisson_tail_exponent(delta: f64, t1: f64) -> Result<PoissonTail, ExperimentError> {
    if !(delta > 0.0 && delta.is_finite() && t1 > 0.0 && t1.is_finite()) {
        return Err(ExperimentError::Invalid(vec![format!(
            "delta and T1 must be positive, got {delta} and {t1}"
        )]));
    }
    let r = delta / t1;
    let theta_star = r.ln_1p();
    // delta theta - T1 (e^theta - theta - 1) at theta = log(1 + r)
    let upper = t1 * ((1.0 + r) * theta_star - r);
    let (theta_lower, lower) = if r < 1.0 {
        let th = -(-r).ln_1p();
        (th, t1 * (r + (1.0 - r) * (-r).ln_1p()))
    } else if r == 1.0 {
        (f64::INFINITY, t1)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(PoissonTail {
        theta_star,
        upper,
        theta_lower,
        lower,
        k12: 0.5 * upper.min(lower),
    })
}

/// Empirical frequency of `sup_{s <= n T1} |beta(s) - s| >= n delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonTailRow {
    pub n: u64,
    pub delta: f64,
    pub t1: f64,
    pub exponents: PoissonTail,
    pub frequency: f64,
    pub stderr: f64,
    /// `exp(-n K12)`
    pub bound: f64,
}

impl PoissonTailRow {
    pub fn result_row(&self) -> ResultRow {
        ResultRow {
            experiment: "poisson_tail".into(),
            model: "poisson".into(),
            n: self.n,
            a_n: None,
            alpha: None,
            params: vec![
                ("delta".into(), self.delta),
                ("t1".into(), self.t1),
                ("theta_star".into(), self.exponents.theta_star),
                ("exponent".into(), self.exponents.upper),
                ("k12".into(), self.exponents.k12),
            ],
            estimate: self.frequency,
            stderr: self.stderr,
            ess: None,
            reference: Some(self.bound),
            scaled_log: (self.frequency > 0.0).then(|| -self.frequency.ln() / self.n as f64),
        }
    }
}

pub fn poisson_sup_frequency(
    delta: f64,
    t1: f64,
    n: u64,
    reps: u64,
    seed: u64,
    n_index: usize,
) -> Result<PoissonTailRow, ExperimentError> {
    let exponents = poisson_tail_exponent(delta, t1)?;
    let nf = n as f64;
    let (horizon, band) = (nf * t1, nf * delta);
    let hits = replicates(reps, |r| {
        let mut rng = replicate_rng(seed, stream_id(r, n_index, 3));
        let (mut s, mut count) = (0.0f64, 0.0f64);
        loop {
            let e: f64 = rng.sample(Exp1);
            let next = s + e;
            if next >= horizon {
                return Ok((count - horizon).abs() >= band);
            }
            // the deviation peaks just before and just after each arrival
            if next - count >= band || count + 1.0 - next >= band {
                return Ok(true);
            }
            count += 1.0;
            s = next;
        }
    })?;
    let frequency = hits.iter().filter(|&&h| h).count() as f64 / reps as f64;
    Ok(PoissonTailRow {
        n,
        delta,
        t1,
        exponents,
        frequency,
        stderr: (frequency * (1.0 - frequency) / reps as f64).sqrt(),
        bound: (-nf * exponents.k12).exp(),
    })
}
