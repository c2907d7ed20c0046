use nalgebra::DVector;

use super::RateError;
use crate::fluid::Grid;

/// A grid path `f` with `f(0) = 0` and its derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePath {
    grid: Grid,
    f: Vec<DVector<f64>>,
    df: Vec<DVector<f64>>,
}

impl CandidatePath {
    /// Builds a path from grid samples. Without `derivative`, `f'` comes from
    /// centred differences inside and second-order one-sided differences at
    /// the two ends.
    pub fn new(
        grid: Grid,
        f: Vec<DVector<f64>>,
        derivative: Option<Vec<DVector<f64>>>,
    ) -> Result<Self, RateError> {
        if f.len() != grid.len() {
            return Err(RateError::GridMismatch);
        }
        let d = f[0].len();
        if f.iter().any(|v| v.len() != d) {
            return Err(RateError::DimensionMismatch);
        }
        if f[0].iter().any(|&v| v != 0.0) {
            return Err(RateError::NonzeroStart(f[0].as_slice().to_vec()));
        }
        if f.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(RateError::NonFinite);
        }
        let df = match derivative {
            Some(df) => {
                if df.len() != grid.len() || df.iter().any(|v| v.len() != d) {
                    return Err(RateError::GridMismatch);
                }
                df
            }
            None => differentiate(&f, grid.h()),
        };
        Ok(Self { grid, f, df })
    }

    pub fn from_fn(
        grid: Grid,
        dim: usize,
        f: impl Fn(f64) -> Vec<f64>,
        df: Option<&dyn Fn(f64) -> Vec<f64>>,
    ) -> Result<Self, RateError> {
        let sample = |h: &dyn Fn(f64) -> Vec<f64>| -> Result<Vec<DVector<f64>>, RateError> {
            grid.times()
                .map(|t| {
                    let v = h(t);
                    if v.len() == dim {
                        Ok(DVector::from_vec(v))
                    } else {
                        Err(RateError::DimensionMismatch)
                    }
                })
                .collect()
        };
        let values = sample(&f)?;
        let derivative = df.map(|d| sample(d)).transpose()?;
        Self::new(grid, values, derivative)
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        let f = vec![DVector::zeros(dim); grid.len()];
        Self {
            df: f.clone(),
            grid,
            f,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.f[0].len()
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.f
    }

    pub fn derivative(&self) -> &[DVector<f64>] {
        &self.df
    }

    pub fn endpoint(&self) -> &DVector<f64> {
        self.f.last().expect("non-empty grid")
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            f: self.f.iter().map(|v| v * c).collect(),
            df: self.df.iter().map(|v| v * c).collect(),
        }
    }
}

fn differentiate(f: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
    let m = f.len() - 1;
    let mut df = Vec::with_capacity(m + 1);
    if m == 1 {
        let s = (&f[1] - &f[0]) / h;
        return vec![s.clone(), s];
    }
    df.push((&f[1] * 4.0 - &f[0] * 3.0 - &f[2]) / (2.0 * h));
    for k in 1..m {
        df.push((&f[k + 1] - &f[k - 1]) / (2.0 * h));
    }
    df.push((&f[m] * 3.0 - &f[m - 1] * 4.0 + &f[m - 2]) / (2.0 * h));
    df
}
