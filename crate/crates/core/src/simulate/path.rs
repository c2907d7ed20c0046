use std::io::Write;

use nalgebra::DVector;

use super::{scaling, SimError};
use crate::fluid::{FluidSolution, Grid};

/// A cadlag path of `X^n`: the state `states[k]` holds on
/// `[times[k], times[k+1])`, the last one until `t_end`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPath {
    n: u64,
    t_end: f64,
    times: Vec<f64>,
    states: Vec<Vec<i64>>,
    jump_ids: Vec<usize>,
}

impl TrajectoryPath {
    pub(crate) fn from_parts(
        n: u64,
        t_end: f64,
        times: Vec<f64>,
        states: Vec<Vec<i64>>,
        jump_ids: Vec<usize>,
    ) -> Self {
        debug_assert_eq!(times.len(), states.len());
        debug_assert_eq!(jump_ids.len() + 1, times.len());
        Self {
            n,
            t_end,
            times,
            states,
            jump_ids,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// `0` followed by the jump times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<i64>] {
        &self.states
    }

    /// Index of the jump fired at each event.
    pub fn jump_ids(&self) -> &[usize] {
        &self.jump_ids
    }

    pub fn num_jumps(&self) -> usize {
        self.jump_ids.len()
    }

    pub fn final_state(&self) -> &[i64] {
        self.states.last().expect("path has a start state")
    }

    /// `X^n_t`, right-continuous.
    pub fn state_at(&self, t: f64) -> &[i64] {
        let k = self.times.partition_point(|&s| s <= t);
        &self.states[k.saturating_sub(1)]
    }

    /// `t,x_1..x_d,jump_index`; the first row is the start state with an
    /// empty jump index.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        self.write_rows(out, None)
    }

    fn write_rows<W: Write>(&self, out: W, log_weights: Option<&[f64]>) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.states[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.push("jump_index".into());
        if log_weights.is_some() {
            header.push("log_weight".into());
        }
        w.write_record(&header)?;
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(s.iter().map(|v| v.to_string()));
            row.push(if k == 0 { String::new() } else { self.jump_ids[k - 1].to_string() });
            if let Some(lw) = log_weights {
                row.push(lw[k].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A path with its log likelihood ratio `log w_T(g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    pub path: TrajectoryPath,
    pub log_weight: f64,
    /// `log w_t(g)` right after each event (0 at the start row).
    pub running: Vec<f64>,
}

impl WeightedSample {
    /// Trajectory columns plus the running `log_weight`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        self.path.write_rows(out, Some(&self.running))
    }
}

/// `theta_t = (X^n_t - n X_t) / a_n` on the fluid grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationPath {
    pub grid: Grid,
    pub theta: Vec<DVector<f64>>,
    pub a_n: f64,
    pub alpha: f64,
    /// False when `n x0` had to be rounded, so `theta_0` need not vanish.
    pub exact_start: bool,
}

impl FluctuationPath {
    /// Builds `theta` from the states of `X^n` at the grid points.
    pub fn from_grid_states<'a>(
        states: impl IntoIterator<Item = &'a [i64]>,
        n: u64,
        fluid: &FluidSolution,
        alpha: f64,
    ) -> Result<Self, SimError> {
        let a_n = scaling(n, alpha);
        let nf = n as f64;
        let theta: Vec<DVector<f64>> = states
            .into_iter()
            .zip(fluid.x())
            .map(|(s, x)| DVector::from_iterator(s.len(), s.iter().zip(x.iter()).map(|(&si, &xi)| (si as f64 - nf * xi) / a_n)))
            .collect();
        if theta.len() != fluid.grid().len() {
            return Err(SimError::GridMismatch(fluid.grid().t_end()));
        }
        let exact_start = theta[0].iter().all(|v| v.abs() * a_n <= 1e-9 * nf.max(1.0));
        let mut out = Self {
            grid: fluid.grid().clone(),
            theta,
            a_n,
            alpha,
            exact_start,
        };
        if exact_start {
            out.theta[0].fill(0.0);
        }
        Ok(out)
    }

    pub fn endpoint(&self) -> &DVector<f64> {
        self.theta.last().expect("non-empty grid")
    }

    /// `max_k |theta_k|_inf`
    pub fn sup_norm(&self) -> f64 {
        self.theta.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}

/// Fluctuation path of `path` around the fluid solution.
pub fn fluctuation(path: &TrajectoryPath, fluid: &FluidSolution, alpha: f64) -> Result<FluctuationPath, SimError> {
    if (path.t_end() - fluid.grid().t_end()).abs() > 1e-12 * path.t_end() {
        return Err(SimError::GridMismatch(fluid.grid().t_end()));
    }
    let states: Vec<&[i64]> = fluid.grid().times().map(|t| path.state_at(t)).collect();
    FluctuationPath::from_grid_states(states, path.n(), fluid, alpha)
}
