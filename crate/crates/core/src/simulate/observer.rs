use super::{TiltTable, TrajectoryPath, WeightedSample};
use crate::model::ValidatedModel;
use crate::fluid::Grid;

/// Receives the events of one replicate.
pub trait PathObserver {
    fn start(&mut self, _state: &[i64]) {}
    /// Called after jump `jump` moved the chain to `state` at time `t`.
    fn jump(&mut self, t: f64, jump: usize, state: &[i64], log_weight: f64);
    fn finish(&mut self, _t_end: f64, _state: &[i64], _log_weight: f64) {}
}

/// Keeps only the terminal state.
#[derive(Clone, Debug, Default)]
pub struct EndpointObserver {
    pub state: Vec<i64>,
    pub log_weight: f64,
    pub events: u64,
}

impl PathObserver for EndpointObserver {
    #[inline]
    fn jump(&mut self, _t: f64, _jump: usize, _state: &[i64], _log_weight: f64) {
        self.events += 1;
    }

    fn finish(&mut self, _t_end: f64, state: &[i64], log_weight: f64) {
        self.state.clear();
        self.state.extend_from_slice(state);
        self.log_weight = log_weight;
    }
}

/// Samples the cadlag path at the points of a grid.
#[derive(Clone, Debug)]
pub struct GridObserver {
    grid: Grid,
    dim: usize,
    current: Vec<i64>,
    next: usize,
    states: Vec<i64>,
    pub log_weight: f64,
}

impl GridObserver {
    pub fn new(grid: Grid, dim: usize) -> Self {
        let len = grid.len();
        Self {
            grid,
            dim,
            current: vec![0; dim],
            next: 0,
            states: Vec::with_capacity(len * dim),
            log_weight: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// State at grid point `k`.
    pub fn state(&self, k: usize) -> &[i64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[i64]> {
        self.states.chunks(self.dim)
    }

    fn fill_until(&mut self, t: f64) {
        while self.next < self.grid.len() && self.grid.time(self.next) < t {
            self.states.extend_from_slice(&self.current);
            self.next += 1;
        }
    }
}

impl PathObserver for GridObserver {
    fn start(&mut self, state: &[i64]) {
        self.current.copy_from_slice(state);
        self.states.clear();
        self.next = 0;
    }

    #[inline]
    fn jump(&mut self, t: f64, _jump: usize, state: &[i64], _log_weight: f64) {
        self.fill_until(t);
        self.current.copy_from_slice(state);
    }

    fn finish(&mut self, _t_end: f64, state: &[i64], log_weight: f64) {
        self.current.copy_from_slice(state);
        self.fill_until(f64::INFINITY);
        self.log_weight = log_weight;
    }
}

/// Records every event.
#[derive(Clone, Debug)]
pub struct RecordingObserver {
    n: u64,
    t_end: f64,
    times: Vec<f64>,
    states: Vec<Vec<i64>>,
    jump_ids: Vec<usize>,
    log_weights: Vec<f64>,
    final_log_weight: f64,
}

impl RecordingObserver {
    pub fn new(n: u64, t_end: f64) -> Self {
        Self {
            n,
            t_end,
            times: Vec::new(),
            states: Vec::new(),
            jump_ids: Vec::new(),
            log_weights: Vec::new(),
            final_log_weight: 0.0,
        }
    }

    pub fn into_path(self) -> TrajectoryPath {
        TrajectoryPath::from_parts(self.n, self.t_end, self.times, self.states, self.jump_ids)
    }

    pub fn into_weighted(self) -> WeightedSample {
        let log_weight = self.final_log_weight;
        let running = self.log_weights.clone();
        WeightedSample {
            path: self.into_path(),
            log_weight,
            running,
        }
    }
}

impl PathObserver for RecordingObserver {
    fn start(&mut self, state: &[i64]) {
        self.times = vec![0.0];
        self.states = vec![state.to_vec()];
        self.jump_ids.clear();
        self.log_weights = vec![0.0];
    }

    fn jump(&mut self, t: f64, jump: usize, state: &[i64], log_weight: f64) {
        self.times.push(t);
        self.states.push(state.to_vec());
        self.jump_ids.push(jump);
        self.log_weights.push(log_weight);
    }

    fn finish(&mut self, _t_end: f64, _state: &[i64], log_weight: f64) {
        self.final_log_weight = log_weight;
    }
}

impl<A: PathObserver, B: PathObserver> PathObserver for (A, B) {
    fn start(&mut self, state: &[i64]) {
        self.0.start(state);
        self.1.start(state);
    }

    #[inline]
    fn jump(&mut self, t: f64, jump: usize, state: &[i64], log_weight: f64) {
        self.0.jump(t, jump, state, log_weight);
        self.1.jump(t, jump, state, log_weight);
    }

    fn finish(&mut self, t_end: f64, state: &[i64], log_weight: f64) {
        self.0.finish(t_end, state, log_weight);
        self.1.finish(t_end, state, log_weight);
    }
}

/// Accumulates `log w_T(g)` for its own tilt along whatever path is being
/// sampled, e.g. the weight of one mixture component on a path drawn from
/// another.
#[derive(Clone, Debug)]
pub struct WeightTracker<'a> {
    model: &'a ValidatedModel,
    table: &'a TiltTable,
    nf: f64,
    x: Vec<f64>,
    rates: Vec<f64>,
    t: f64,
    pub log_weight: f64,
}

impl<'a> WeightTracker<'a> {
    pub fn new(model: &'a ValidatedModel, table: &'a TiltTable, n: u64) -> Self {
        Self {
            model,
            table,
            nf: n as f64,
            x: vec![0.0; model.dimension()],
            rates: vec![0.0; model.num_jumps()],
            t: 0.0,
            log_weight: 0.0,
        }
    }

    fn set_rates(&mut self, state: &[i64]) {
        for (xi, &s) in self.x.iter_mut().zip(state) {
            *xi = s as f64 / self.nf;
        }
        self.model.rates_into(&self.x, &mut self.rates);
        for r in self.rates.iter_mut() {
            *r = r.max(0.0) * self.nf;
        }
    }
}

impl PathObserver for WeightTracker<'_> {
    fn start(&mut self, state: &[i64]) {
        self.t = 0.0;
        self.log_weight = 0.0;
        self.set_rates(state);
    }

    #[inline]
    fn jump(&mut self, t: f64, jump: usize, state: &[i64], _log_weight: f64) {
        self.log_weight -= self.table.compensator(self.t, t, &self.rates);
        self.log_weight += self.table.exponent(t, jump);
        self.t = t;
        self.set_rates(state);
    }

    fn finish(&mut self, t_end: f64, _state: &[i64], _log_weight: f64) {
        self.log_weight -= self.table.compensator(self.t, t_end, &self.rates);
        self.t = t_end;
    }
}

impl<O: PathObserver> PathObserver for Vec<O> {
    fn start(&mut self, state: &[i64]) {
        self.iter_mut().for_each(|o| o.start(state));
    }

    #[inline]
    fn jump(&mut self, t: f64, jump: usize, state: &[i64], log_weight: f64) {
        self.iter_mut().for_each(|o| o.jump(t, jump, state, log_weight));
    }

    fn finish(&mut self, t_end: f64, state: &[i64], log_weight: f64) {
        self.iter_mut().for_each(|o| o.finish(t_end, state, log_weight));
    }
}
