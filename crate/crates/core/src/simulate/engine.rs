use rand::Rng;
use rand_distr::Exp1;

use super::{check_alpha, scaling, PathObserver, SimError};
use crate::fluid::{Grid, TiltControl};
use crate::model::{ValidatedModel, DOMAIN_TOL};

/// Replicates whose total jump rate exceeds this are aborted.
pub const DEFAULT_RATE_CAP: f64 = 1e12;

/// Exponents `c g_k . l` of a tilt, tabulated per grid node and jump.
#[derive(Clone, Debug)]
pub struct TiltTable {
    c: f64,
    grid: Grid,
    num_jumps: usize,
    exponents: Vec<f64>,
    bound: f64,
}

impl TiltTable {
    pub fn new(model: &ValidatedModel, g: &TiltControl, n: u64, alpha: f64) -> Result<Self, SimError> {
        check_alpha(alpha)?;
        if n == 0 {
            return Err(SimError::BadScale);
        }
        Self::with_factor(model, g, scaling(n, alpha) / n as f64)
    }

    /// Tilt with an explicit factor `c` in place of `a_n / n`.
    pub fn with_factor(model: &ValidatedModel, g: &TiltControl, c: f64) -> Result<Self, SimError> {
        if g.dimension() != model.dimension() {
            return Err(SimError::DimensionMismatch {
                expected: model.dimension(),
                got: g.dimension(),
            });
        }
        let jumps = model.jump_vectors();
        let mut exponents = Vec::with_capacity(g.grid().len() * jumps.len());
        for gk in g.values() {
            for l in jumps {
                exponents.push(c * l.iter().zip(gk.iter()).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        // M_g = max_l sup_t exp(c |g_t . l|); g is linear between nodes
        let bound = exponents.iter().fold(0.0f64, |m, e| m.max(e.abs())).exp();
        Ok(Self {
            c,
            grid: g.grid().clone(),
            num_jumps: jumps.len(),
            exponents,
            bound,
        })
    }

    pub fn factor(&self) -> f64 {
        self.c
    }

    /// The thinning bound `M_g`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    fn node(&self, k: usize, l: usize) -> f64 {
        self.exponents[k * self.num_jumps + l]
    }

    /// `c g_t . l`
    #[inline]
    pub fn exponent(&self, t: f64, l: usize) -> f64 {
        let (k, w) = self.grid.locate(t);
        if w == 0.0 {
            self.node(k, l)
        } else {
            (1.0 - w) * self.node(k, l) + w * self.node(k + 1, l)
        }
    }

    /// `int_{t0}^{t1} sum_l rates[l] (exp(c g_s . l) - 1) ds` for rates that
    /// are constant on the interval.
    pub fn compensator(&self, t0: f64, t1: f64, rates: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut s = t0;
        let mut k = self.grid.cell(t0);
        let last = self.grid.steps() - 1;
        // walk cells by index: `cell(s)` at a node can round down a cell
        while s < t1 {
            let end = if k == last { t1 } else { self.grid.time(k + 1).min(t1) };
            let dt = end - s;
            if dt > 0.0 {
                let (tk, h) = (self.grid.time(k), self.grid.h());
                let (w0, w1) = ((s - tk) / h, (end - tk) / h);
                for (l, &r) in rates.iter().enumerate() {
                    if r == 0.0 {
                        continue;
                    }
                    let (e0, e1) = (self.node(k, l), self.node(k + 1, l));
                    let a0 = e0 + w0 * (e1 - e0);
                    let a1 = e0 + w1 * (e1 - e0);
                    total += r * dt * exp_mean_minus_one(a0, a1 - a0);
                }
            }
            if end >= t1 {
                break;
            }
            s = end;
            k += 1;
        }
        total
    }
}

/// `int_0^1 exp(a + d u) du - 1`, accurate for small arguments.
fn exp_mean_minus_one(a: f64, d: f64) -> f64 {
    // (e^d - 1)/d - 1
    let rel = if d.abs() < 1e-4 {
        d * (0.5 + d * (1.0 / 6.0 + d / 24.0))
    } else {
        d.exp_m1() / d - 1.0
    };
    a.exp_m1() + a.exp() * rel
}

/// How a run treats the tilt.
#[derive(Clone, Copy, Debug)]
pub enum Mode<'a> {
    /// Plain chain, no weight.
    Plain,
    /// Plain chain; the weight `w_T(g)` is tracked along the path.
    Weighted(&'a TiltTable),
    /// Chain under the tilted law, sampled by thinning; weight tracked.
    Tilted(&'a TiltTable),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub events: u64,
    pub rejections: u64,
    pub log_weight: f64,
}

/// Event-driven simulator for one model, scale and horizon.
#[derive(Clone, Debug)]
pub struct Simulator {
    model: ValidatedModel,
    n: u64,
    nf: f64,
    t_end: f64,
    rate_cap: f64,
    start: Vec<i64>,
    exact_start: bool,
    jumps: Vec<Vec<i64>>,
}

impl Simulator {
    /// The start state is `round(n x0)`, or its floor if rounding leaves `nG`.
    pub fn new(model: &ValidatedModel, n: u64, t_end: f64) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::BadScale);
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(SimError::BadHorizon(t_end));
        }
        let nf = n as f64;
        let scaled: Vec<f64> = model.x0().iter().map(|x| x * nf).collect();
        let mut start: Vec<i64> = scaled.iter().map(|v| v.round() as i64).collect();
        if !model.domain().contains_scaled(&start, nf, DOMAIN_TOL) {
            start = scaled.iter().map(|v| v.floor() as i64).collect();
            if !model.domain().contains_scaled(&start, nf, DOMAIN_TOL) {
                return Err(SimError::StartOutsideDomain(start));
            }
        }
        let exact_start = scaled
            .iter()
            .zip(&start)
            .all(|(v, &s)| (v - s as f64).abs() <= 1e-9 * v.abs().max(1.0));
        Ok(Self {
            model: model.clone(),
            n,
            nf,
            t_end,
            rate_cap: DEFAULT_RATE_CAP,
            start,
            exact_start,
            jumps: model.jumps().to_vec(),
        })
    }

    pub fn with_rate_cap(mut self, cap: f64) -> Self {
        self.rate_cap = cap;
        self
    }

    pub fn model(&self) -> &ValidatedModel {
        &self.model
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn start_state(&self) -> &[i64] {
        &self.start
    }

    /// Whether `n x0` was already integral, so `X_0^n = n x0`.
    pub fn exact_start(&self) -> bool {
        self.exact_start
    }

    /// Runs one replicate. `g = 0` in [`Mode::Tilted`] consumes the random
    /// stream exactly like [`Mode::Plain`].
    pub fn run<R: Rng + ?Sized, O: PathObserver>(
        &self,
        rng: &mut R,
        mode: Mode<'_>,
        obs: &mut O,
    ) -> Result<RunSummary, SimError> {
        let table = match mode {
            Mode::Plain => None,
            Mode::Weighted(t) | Mode::Tilted(t) => {
                if (t.grid.t_end() - self.t_end).abs() > 1e-12 * self.t_end {
                    return Err(SimError::GridMismatch(self.t_end));
                }
                Some(t)
            }
        };
        let tilted = matches!(mode, Mode::Tilted(_));
        let bound = if tilted { table.map_or(1.0, |t| t.bound) } else { 1.0 };
        let num_jumps = self.jumps.len();
        let need_uniform = num_jumps > 1 || bound > 1.0;

        let d = self.model.dimension();
        let mut state = self.start.clone();
        let mut x = vec![0.0; d];
        let mut rates = vec![0.0; num_jumps];
        let mut total = 0.0;
        let mut dirty = true;
        let mut t = 0.0;
        let mut summary = RunSummary::default();
        obs.start(&state);

        loop {
            if dirty {
                for (xi, &s) in x.iter_mut().zip(&state) {
                    *xi = s as f64 / self.nf;
                }
                self.model.rates_into(&x, &mut rates);
                total = 0.0;
                for r in rates.iter_mut() {
                    *r = r.max(0.0) * self.nf;
                    total += *r;
                }
                if !(total <= self.rate_cap) {
                    return Err(SimError::RateOverflow { t, rate: total });
                }
                dirty = false;
            }
            let envelope = total * bound;
            if envelope <= 0.0 {
                break;
            }
            let e: f64 = rng.sample(Exp1);
            let t_next = t + e / envelope;
            if t_next >= self.t_end {
                if let Some(tab) = table {
                    summary.log_weight -= tab.compensator(t, self.t_end, &rates);
                }
                break;
            }
            if let Some(tab) = table {
                summary.log_weight -= tab.compensator(t, t_next, &rates);
            }
            t = t_next;

            let chosen = if !need_uniform {
                Some(0)
            } else {
                let u = rng.random::<f64>() * envelope;
                let mut acc = 0.0;
                let mut chosen = None;
                let mut last_live = None;
                for (l, &r) in rates.iter().enumerate() {
                    if r == 0.0 {
                        continue;
                    }
                    last_live = Some(l);
                    acc += match (tilted, table) {
                        (true, Some(tab)) => r * tab.exponent(t, l).exp(),
                        _ => r,
                    };
                    if u < acc {
                        chosen = Some(l);
                        break;
                    }
                }
                if tilted && acc > envelope * (1.0 + 1e-12) {
                    return Err(SimError::ThinningBoundExceeded(t));
                }
                // rounding can leave u just above the plain total
                if chosen.is_none() && !tilted {
                    chosen = last_live;
                }
                chosen
            };
            let Some(l) = chosen else {
                summary.rejections += 1;
                continue;
            };

            for (s, dl) in state.iter_mut().zip(&self.jumps[l]) {
                *s += dl;
            }
            if !self.model.domain().contains_scaled(&state, self.nf, DOMAIN_TOL) {
                return Err(SimError::LeftDomain { t, state });
            }
            if let Some(tab) = table {
                summary.log_weight += tab.exponent(t, l);
                if !summary.log_weight.is_finite() {
                    return Err(SimError::NonfiniteWeight(t));
                }
            }
            summary.events += 1;
            dirty = true;
            obs.jump(t, l, &state, summary.log_weight);
        }
        if !summary.log_weight.is_finite() {
            return Err(SimError::NonfiniteWeight(self.t_end));
        }
        obs.finish(self.t_end, &state, summary.log_weight);
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_mean_small_and_large() {
        for (a, d) in [(0.0f64, 0.0f64), (1e-3, 2e-5), (0.3, -0.7), (-2.0, 3.0)] {
            let exact = if d == 0.0 { a.exp() } else { (a.exp() * (d.exp() - 1.0)) / d };
            assert!((exp_mean_minus_one(a, d) - (exact - 1.0)).abs() < 1e-11, "{a} {d}");
        }
    }

    #[test]
    fn compensator_spans_every_cell() {
        use crate::model::{builtin, validate_model, Builtin};
        let m = validate_model(builtin(Builtin::Yule, &Default::default()).unwrap(), 16).unwrap();
        for h in [0.02, 0.1, 1.0 / 3.0] {
            let g = TiltControl::constant(Grid::with_step(1.0, h).unwrap(), &[0.5]);
            let tab = TiltTable::with_factor(&m, &g, 1.0).unwrap();
            let exact = 2.0 * 0.5f64.exp_m1();
            for (a, b) in [(0.0, 1.0), (0.06, 0.74), (0.2, 0.4)] {
                let got = tab.compensator(a, b, &[2.0]);
                assert!((got - exact * (b - a)).abs() < 1e-13, "h = {h}: {got}");
            }
        }
    }
}
