//! Deterministic limit objects on a shared uniform grid.
//!
//! [`solve_fluid`] integrates `X' = sum_l l F_l(X)` with classical RK4 and
//! fills `b_t` and `sigma_t` along the solution. Every linear ODE driven by
//! the fluid path (covariance, tilted mean, propagator) is integrated jointly
//! with `X`, so RK4 stages see the exact stage values of `b` and `sigma`
//! instead of interpolated ones.

mod grid;
mod oracle;
mod tilt;

pub use grid::Grid;
pub use oracle::{closed_form_oracle, ClosedForm, OracleValues};
pub use tilt::TiltControl;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{ModelError, ValidatedModel, DOMAIN_TOL};

/// Eigenvalues of covariance matrices below `-PSD_TOL` are hard errors.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error("step {h} does not divide the horizon {t_end}")]
    BadStep { h: f64, t_end: f64 },
    #[error("fluid path left the domain at t = {t}: x = {x:?} (violation {violation:e})")]
    LeftDomain { t: f64, x: Vec<f64>, violation: f64 },
    #[error("grids do not match")]
    GridMismatch,
    #[error("matrix at t = {t} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { t: f64, min_eigenvalue: f64 },
    #[error("covariance has not been computed; call solve_lyapunov first")]
    MissingCovariance,
    #[error("parameters out of range: {0}")]
    ParamsOutOfRange(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Fluid path with its linearisation and (optionally) the fluctuation
/// covariance, all sampled on one grid.
#[derive(Clone, Debug)]
pub struct FluidSolution {
    model: ValidatedModel,
    grid: Grid,
    x: Vec<DVector<f64>>,
    b: Vec<DMatrix<f64>>,
    sigma: Vec<DMatrix<f64>>,
    sigma_ou: Option<Vec<DMatrix<f64>>>,
}

impl FluidSolution {
    pub fn model(&self) -> &ValidatedModel {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    pub fn x(&self) -> &[DVector<f64>] {
        &self.x
    }

    pub fn b(&self) -> &[DMatrix<f64>] {
        &self.b
    }

    pub fn sigma(&self) -> &[DMatrix<f64>] {
        &self.sigma
    }

    pub fn sigma_ou(&self) -> Option<&[DMatrix<f64>]> {
        self.sigma_ou.as_deref()
    }

    /// Covariance at the final time.
    pub fn terminal_covariance(&self) -> Result<&DMatrix<f64>, FluidError> {
        self.sigma_ou
            .as_ref()
            .and_then(|s| s.last())
            .ok_or(FluidError::MissingCovariance)
    }

    pub fn x_final(&self) -> &DVector<f64> {
        self.x.last().expect("grid has at least two points")
    }

    /// Linear interpolation of the fluid path.
    pub fn x_at(&self, t: f64) -> DVector<f64> {
        let (k, w) = self.grid.locate(t);
        if w == 0.0 {
            return self.x[k].clone();
        }
        &self.x[k] * (1.0 - w) + &self.x[k + 1] * w
    }

    /// Writes `t, X_1..X_d, b_11..b_dd, sigma_11..sigma_dd, Sigma_11..Sigma_dd`
    /// (matrices row-major; the `Sigma` block only once it is computed).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let d = self.dimension();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("X_{i}")));
        for name in ["b", "sigma", "Sigma"] {
            if name == "Sigma" && self.sigma_ou.is_none() {
                continue;
            }
            for i in 1..=d {
                for j in 1..=d {
                    header.push(format!("{name}_{i}{j}"));
                }
            }
        }
        w.write_record(&header)?;
        for k in 0..self.grid.len() {
            let mut row = vec![self.grid.time(k).to_string()];
            row.extend(self.x[k].iter().map(|v| v.to_string()));
            let mut mats = vec![&self.b[k], &self.sigma[k]];
            if let Some(s) = &self.sigma_ou {
                mats.push(&s[k]);
            }
            for m in mats {
                for i in 0..d {
                    for j in 0..d {
                        row.push(m[(i, j)].to_string());
                    }
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Integrates an auxiliary ODE `y' = rhs(t, X_t, y)` jointly with the
    /// fluid path, using the same RK4 steps. `post` runs after each step.
    pub fn integrate_along<F, P>(&self, y0: DVector<f64>, rhs: F, post: P) -> Result<Vec<DVector<f64>>, FluidError>
    where
        F: Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64>,
        P: FnMut(f64, &mut DVector<f64>) -> Result<(), FluidError>,
    {
        let x0 = DVector::from_column_slice(self.model.x0());
        let (_, ys) = rk4_joint(&self.model, &self.grid, x0, y0, rhs, post)?;
        Ok(ys)
    }

    /// State-transition matrices `Phi(t_k, 0)` of `y' = b_t y`.
    pub fn propagator(&self) -> Result<Vec<DMatrix<f64>>, FluidError> {
        let d = self.dimension();
        let model = self.model.clone();
        let ys = self.integrate_along(
            DVector::from_column_slice(DMatrix::<f64>::identity(d, d).as_slice()),
            |_, x, y| {
                let b = model.b_matrix_unchecked(x.as_slice());
                let phi = DMatrix::from_column_slice(d, d, y.as_slice());
                DVector::from_column_slice((b * phi).as_slice())
            },
            |_, _| Ok(()),
        )?;
        Ok(ys
            .into_iter()
            .map(|y| DMatrix::from_column_slice(d, d, y.as_slice()))
            .collect())
    }
}

fn rk4_joint<F, P>(
    model: &ValidatedModel,
    grid: &Grid,
    x0: DVector<f64>,
    y0: DVector<f64>,
    rhs: F,
    mut post: P,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>), FluidError>
where
    F: Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64>,
    P: FnMut(f64, &mut DVector<f64>) -> Result<(), FluidError>,
{
    let h = grid.h();
    let drift = |x: &DVector<f64>| model.drift_unchecked(x.as_slice());
    let has_aux = !y0.is_empty();
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    let mut x = x0;
    let mut y = y0;
    xs.push(x.clone());
    ys.push(y.clone());
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let k1x = drift(&x);
        let x2 = &x + &k1x * (0.5 * h);
        let k2x = drift(&x2);
        let x3 = &x + &k2x * (0.5 * h);
        let k3x = drift(&x3);
        let x4 = &x + &k3x * h;
        let k4x = drift(&x4);
        if has_aux {
            let k1y = rhs(t, &x, &y);
            let k2y = rhs(t + 0.5 * h, &x2, &(&y + &k1y * (0.5 * h)));
            let k3y = rhs(t + 0.5 * h, &x3, &(&y + &k2y * (0.5 * h)));
            let k4y = rhs(t + h, &x4, &(&y + &k3y * h));
            y += (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (h / 6.0);
        }
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        let t_next = grid.time(k + 1);
        let violation = model.domain().violation(x.as_slice());
        if !(violation <= DOMAIN_TOL) {
            return Err(FluidError::LeftDomain {
                t: t_next,
                x: x.as_slice().to_vec(),
                violation,
            });
        }
        if has_aux {
            post(t_next, &mut y)?;
        }
        xs.push(x.clone());
        ys.push(y.clone());
    }
    Ok((xs, ys))
}

/// Integrates the fluid ODE on `[0, t_end]` with step `h` and evaluates
/// `b_t`, `sigma_t` along the path.
pub fn solve_fluid(model: &ValidatedModel, t_end: f64, h: f64) -> Result<FluidSolution, FluidError> {
    let grid = Grid::with_step(t_end, h)?;
    solve_fluid_on(model, grid)
}

pub fn solve_fluid_on(model: &ValidatedModel, grid: Grid) -> Result<FluidSolution, FluidError> {
    let x0 = DVector::from_column_slice(model.x0());
    let (x, _) = rk4_joint(model, &grid, x0, DVector::zeros(0), |_, _, y| y.clone(), |_, _| Ok(()))?;
    let b = x.iter().map(|xk| model.b_matrix_unchecked(xk.as_slice())).collect();
    let sigma = x.iter().map(|xk| model.sigma_matrix_unchecked(xk.as_slice())).collect();
    Ok(FluidSolution {
        model: model.clone(),
        grid,
        x,
        b,
        sigma,
        sigma_ou: None,
    })
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Solves `Sigma' = b Sigma + Sigma b^T + sigma`, `Sigma(0) = 0`, the
/// covariance of the Gaussian fluctuation limit, and stores it on `fluid`.
pub fn solve_lyapunov(mut fluid: FluidSolution) -> Result<FluidSolution, FluidError> {
    let d = fluid.dimension();
    let model = fluid.model.clone();
    let ys = fluid.integrate_along(
        DVector::zeros(d * d),
        |_, x, y| {
            let b = model.b_matrix_unchecked(x.as_slice());
            let sigma = model.sigma_matrix_unchecked(x.as_slice());
            let s = DMatrix::from_column_slice(d, d, y.as_slice());
            let ds = &b * &s + &s * b.transpose() + sigma;
            DVector::from_column_slice(ds.as_slice())
        },
        |t, y| {
            let s = DMatrix::from_column_slice(d, d, y.as_slice());
            let sym = (&s + s.transpose()) * 0.5;
            let scale = sym.amax().max(1.0);
            let min = min_eigenvalue(&sym);
            if min < -PSD_TOL * scale {
                return Err(FluidError::NotPositiveSemidefinite { t, min_eigenvalue: min });
            }
            y.copy_from_slice(sym.as_slice());
            Ok(())
        },
    )?;
    fluid.sigma_ou = Some(
        ys.into_iter()
            .map(|y| DMatrix::from_column_slice(d, d, y.as_slice()))
            .collect(),
    );
    Ok(fluid)
}

/// Solves `y' = b_t y + sigma_t g_t`, `y_0 = 0`: the mean fluctuation path
/// under the exponential tilt by `g`.
pub fn solve_tilted_ode(fluid: &FluidSolution, g: &TiltControl) -> Result<Vec<DVector<f64>>, FluidError> {
    if g.grid() != fluid.grid() || g.dimension() != fluid.dimension() {
        return Err(FluidError::GridMismatch);
    }
    let model = fluid.model.clone();
    fluid.integrate_along(
        DVector::zeros(fluid.dimension()),
        |t, x, y| {
            let b = model.b_matrix_unchecked(x.as_slice());
            let sigma = model.sigma_matrix_unchecked(x.as_slice());
            b * y + sigma * g.eval(t)
        },
        |_, _| Ok(()),
    )
}
