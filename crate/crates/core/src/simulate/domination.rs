use rand::Rng;
use rand_distr::Exp1;

use super::{replicate_rng, SimError, Simulator};
use crate::model::{sample_domain_with_scale, sampling_scale, ValidatedModel, DOMAIN_TOL};

/// Constants of the Yule domination: `sum_l |l|_1 F_l(x) <= K6 |x|_1` on `G`
/// and `K7 = max_l |l|_1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DominationConstants {
    pub k6: f64,
    pub k7: i64,
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

/// Estimates `K6` as the largest ratio `sum_l |l|_1 F_l(x) / |x|_1` over a
/// sample of `G`, including the limits along sample directions at the
/// origin. On unbounded domains the sample is repeated at a 100 times
/// larger scale; growth of the ratio there is reported as unbounded.
pub fn yule_domination_constants(model: &ValidatedModel) -> Result<DominationConstants, SimError> {
    let spec = model.spec();
    let weights: Vec<f64> = model.jump_vectors().iter().map(|l| l1(l)).collect();
    let k7 = weights.iter().fold(0.0f64, |a, &w| a.max(w)) as i64;
    let d = model.dimension();
    let mut rates = vec![0.0; model.num_jumps()];
    let mut grad = vec![0.0; d];
    let origin_inside = model.domain().contains(&vec![0.0; d], DOMAIN_TOL);

    let max_ratio = |points: &[Vec<f64>], rates: &mut [f64], grad: &mut [f64]| -> f64 {
        let mut best = 0.0f64;
        for x in points {
            let norm = l1(x);
            if norm == 0.0 {
                continue;
            }
            model.rates_into(x, rates);
            let s: f64 = rates.iter().zip(&weights).map(|(r, w)| r.max(0.0) * w).sum();
            best = best.max(s / norm);
            if origin_inside {
                // limit of the ratio along the ray through x as it shrinks to 0
                let zero = vec![0.0; d];
                let mut slope = 0.0;
                for (p, w) in spec.rates.iter().zip(&weights) {
                    p.gradient_into(&zero, grad);
                    slope += w * grad.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>();
                }
                best = best.max(slope / norm);
            }
        }
        best
    };

    let scale = sampling_scale(&spec.x0);
    let base_points = sample_domain_with_scale(spec, 512, scale);
    let k6 = max_ratio(&base_points, &mut rates, &mut grad);
    if !k6.is_finite() {
        return Err(SimError::UnboundedRatio(k6));
    }
    if !model.domain().is_bounded_box(d) {
        let far = sample_domain_with_scale(spec, 512, 100.0 * scale);
        let k6_far = max_ratio(&far, &mut rates, &mut grad);
        if !k6_far.is_finite() || k6_far > 2.0 * k6 + 1e-12 {
            return Err(SimError::UnboundedRatio(k6_far));
        }
        return Ok(DominationConstants { k6: k6.max(k6_far), k7 });
    }
    Ok(DominationConstants { k6, k7 })
}

/// Outcome of one run of the chain coupled with its dominating Yule count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledRun {
    /// `sup_t |X^n_t|_1`
    pub sup_norm: i64,
    /// Dominating count `Y_T`; `Y` is a Yule process with per-capita rate
    /// `K6 K7` started at `ceil(|X_0|_1 / K7)`.
    pub yule_final: i64,
    pub yule_start: i64,
    pub k7: i64,
}

/// Samples `(X^n, Y)` jointly so that `|X^n_t|_1 <= K7 Y_t` holds pathwise:
/// each jump that increases `|X|_1` also moves `Y` up by one, and `Y` makes
/// extra moves at rate `K6 K7 Y` minus that up-jump rate. The inequality is
/// checked after every event.
pub fn coupled_domination(
    model: &ValidatedModel,
    n: u64,
    t_end: f64,
    consts: DominationConstants,
    seed: u64,
) -> Result<CoupledRun, SimError> {
    let sim = Simulator::new(model, n, t_end)?;
    let mut rng = replicate_rng(seed, 0);
    let nf = n as f64;
    let jumps = model.jumps();
    let mut state = sim.start_state().to_vec();
    let norm = |s: &[i64]| s.iter().map(|v| v.abs()).sum::<i64>();
    let k7 = consts.k7.max(1);
    let kappa = consts.k6 * k7 as f64;
    let yule_start = (norm(&state) + k7 - 1) / k7;
    let mut y = yule_start;
    let mut sup_norm = norm(&state);
    let mut x = vec![0.0; model.dimension()];
    let mut rates = vec![0.0; jumps.len()];
    let mut up = vec![false; jumps.len()];
    let mut t = 0.0;
    loop {
        for (xi, &s) in x.iter_mut().zip(&state) {
            *xi = s as f64 / nf;
        }
        model.rates_into(&x, &mut rates);
        let current = norm(&state);
        let mut total_x = 0.0;
        let mut up_rate = 0.0;
        for (l, r) in rates.iter_mut().enumerate() {
            *r = r.max(0.0) * nf;
            total_x += *r;
            let after: i64 = state.iter().zip(&jumps[l]).map(|(s, dl)| (s + dl).abs()).sum();
            up[l] = after > current;
            if up[l] {
                up_rate += *r;
            }
        }
        let yule_rate = kappa * y as f64;
        let extra = yule_rate - up_rate;
        if extra < -1e-9 * yule_rate.max(1.0) {
            return Err(SimError::DominationViolated {
                t,
                reason: format!("up-jump rate {up_rate} exceeds K6 K7 Y = {yule_rate}"),
            });
        }
        let extra = extra.max(0.0);
        let total = total_x + extra;
        if !(total <= super::DEFAULT_RATE_CAP) {
            return Err(SimError::RateOverflow { t, rate: total });
        }
        if total <= 0.0 {
            break;
        }
        let e: f64 = rng.sample(Exp1);
        t += e / total;
        if t >= t_end {
            break;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut fired = None;
        for (l, &r) in rates.iter().enumerate() {
            acc += r;
            if r > 0.0 && u < acc {
                fired = Some(l);
                break;
            }
        }
        match fired {
            Some(l) => {
                for (s, dl) in state.iter_mut().zip(&jumps[l]) {
                    *s += dl;
                }
                if up[l] {
                    y += 1;
                }
            }
            None => y += 1,
        }
        let now = norm(&state);
        sup_norm = sup_norm.max(now);
        if now > k7 * y {
            return Err(SimError::DominationViolated {
                t,
                reason: format!("|X|_1 = {now} > K7 Y = {}", k7 * y),
            });
        }
    }
    Ok(CoupledRun {
        sup_norm,
        yule_final: y,
        yule_start,
        k7,
    })
}
