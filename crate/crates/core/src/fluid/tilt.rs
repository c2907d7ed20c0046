use nalgebra::DVector;

use super::{FluidError, Grid};

/// A grid-sampled control `g: [0, T] -> R^d`, linear between grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltControl {
    grid: Grid,
    values: Vec<DVector<f64>>,
}

impl TiltControl {
    pub fn new(grid: Grid, values: Vec<DVector<f64>>) -> Result<Self, FluidError> {
        if values.len() != grid.len() {
            return Err(FluidError::GridMismatch);
        }
        let d = values[0].len();
        if values.iter().any(|v| v.len() != d) {
            return Err(FluidError::GridMismatch);
        }
        if values.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(FluidError::ParamsOutOfRange("control values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        let values = vec![DVector::zeros(dim); grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        let values = vec![DVector::from_column_slice(value); grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(grid: Grid, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self, FluidError> {
        let values: Vec<_> = grid
            .times()
            .map(|t| {
                let v = f(t);
                assert_eq!(v.len(), dim, "control has the wrong dimension");
                DVector::from_vec(v)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let (k, w) = self.grid.locate(t);
        if w == 0.0 {
            self.values[k].clone()
        } else {
            &self.values[k] * (1.0 - w) + &self.values[k + 1] * w
        }
    }

    /// Writes `g_t` into `out` without allocating.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (k, w) = self.grid.locate(t);
        let a = &self.values[k];
        if w == 0.0 {
            out.copy_from_slice(a.as_slice());
        } else {
            let b = &self.values[k + 1];
            for i in 0..out.len() {
                out[i] = a[i] * (1.0 - w) + b[i] * w;
            }
        }
    }

    /// Exact slope of the linear piece on cell `k`.
    pub fn cell_slope(&self, k: usize) -> DVector<f64> {
        (&self.values[k + 1] - &self.values[k]) / self.grid.h()
    }

    /// `g'_t`; at a grid point the slope of the cell to the right (the last
    /// cell at `T`).
    pub fn slope(&self, t: f64) -> DVector<f64> {
        self.cell_slope(self.grid.cell(t))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}

impl std::ops::Add for &TiltControl {
    type Output = TiltControl;

    fn add(self, rhs: &TiltControl) -> TiltControl {
        assert_eq!(self.grid, rhs.grid, "controls live on different grids");
        TiltControl {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}
