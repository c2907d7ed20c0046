//! The quadratic rate functional
//! `I(f) = 1/2 int (f' - b f)^T sigma^{-1} (f' - b f) dt`
//! in closed form, through a pseudo-inverse when `sigma` is singular, and as
//! a supremum of `L1(g) - L2(g)/2` over tent-function controls `g`.
//!
//! All integrals use the fluid grid. `L1(g) = f_T.g_T - int f.g' - int (b f).g`
//! is computed with `int f.g'` exact for piecewise-linear `f` and `g`; summing
//! by parts turns it into `sum_k c_k . g_k` (see [`l1_coefficients`]).

mod path;

pub use path::CandidatePath;

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::fluid::{solve_tilted_ode, FluidError, FluidSolution, Grid, TiltControl};

/// `sigma_t` counts as invertible when its smallest eigenvalue exceeds this
/// fraction of the largest.
pub const SIGMA_COND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("path and fluid solution use different grids")]
    GridMismatch,
    #[error("path dimension does not match the model")]
    DimensionMismatch,
    #[error("path must start at 0, got {0:?}")]
    NonzeroStart(Vec<f64>),
    #[error("path has non-finite values")]
    NonFinite,
    #[error("sigma is singular at t = {t} (eigenvalues in [{min:e}, {max:e}])")]
    SigmaSingular { t: f64, min: f64, max: f64 },
    #[error("endpoint covariance is singular (eigenvalues in [{min:e}, {max:e}])")]
    SingularEndpointCovariance { min: f64, max: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateOptions {
    /// Relative singular-value cutoff for the pseudo-inverse of `sigma_t`.
    pub sv_cutoff: f64,
    /// `f' - b f` must lie within `tol_range * max_t |f' - b f|` of
    /// `range(sigma_t)` at every grid point, otherwise `I(f) = +inf`.
    pub tol_range: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            sv_cutoff: 1e-10,
            tol_range: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateValue {
    Finite(f64),
    Infinite,
}

impl RateValue {
    pub fn as_f64(self) -> f64 {
        match self {
            RateValue::Finite(v) => v,
            RateValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, RateValue::Finite(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    Closed,
    Degenerate,
    VariationalLb,
}

impl RateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RateMethod::Closed => "closed",
            RateMethod::Degenerate => "degenerate",
            RateMethod::VariationalLb => "variational_lb",
        }
    }
}

impl std::fmt::Display for RateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub value: RateValue,
    /// `psi_t` on the grid; `None` when the value is infinite.
    pub psi: Option<Vec<DVector<f64>>>,
    /// Largest distance of `f' - b f` from `range(sigma_t)` (closed and
    /// degenerate), or from the target endpoint (endpoint minimisers).
    pub residual: f64,
    pub method: RateMethod,
    pub grid: Grid,
}

impl RateReport {
    /// `value,method,residual_max`
    pub fn write_summary_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value", "method", "residual_max"])?;
        w.write_record([
            self.value.as_f64().to_string(),
            self.method.to_string(),
            self.residual.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }

    /// `t,psi_1..psi_d`; writes only the header when `psi` is absent.
    pub fn write_psi_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.psi.as_ref().map_or(0, |p| p[0].len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("psi_{i}")));
        w.write_record(&header)?;
        if let Some(psi) = &self.psi {
            for (t, p) in self.grid.times().zip(psi) {
                let mut row = vec![t.to_string()];
                row.extend(p.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn tilt(&self) -> Option<TiltControl> {
        self.psi
            .as_ref()
            .map(|p| TiltControl::new(self.grid.clone(), p.clone()).expect("psi is finite and on the grid"))
    }
}

fn check_grid(fluid: &FluidSolution, grid: &Grid, dim: usize) -> Result<(), RateError> {
    if grid != fluid.grid() {
        return Err(RateError::GridMismatch);
    }
    if dim != fluid.dimension() {
        return Err(RateError::DimensionMismatch);
    }
    Ok(())
}

fn trapezoid_weight(grid: &Grid, k: usize) -> f64 {
    if k == 0 || k == grid.steps() {
        0.5 * grid.h()
    } else {
        grid.h()
    }
}

/// `f'_t - b_t f_t` on the grid.
fn drift_residuals(fluid: &FluidSolution, f: &CandidatePath) -> Vec<DVector<f64>> {
    f.values()
        .iter()
        .zip(f.derivative())
        .zip(fluid.b())
        .map(|((fk, dfk), bk)| dfk - bk * fk)
        .collect()
}

fn eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    ((m + m.transpose()) * 0.5).symmetric_eigen()
}

/// Closed-form rate with `psi = sigma^{-1}(f' - b f)`, trapezoid quadrature.
pub fn rate_closed_form(fluid: &FluidSolution, f: &CandidatePath) -> Result<RateReport, RateError> {
    check_grid(fluid, f.grid(), f.dimension())?;
    let grid = fluid.grid();
    let u = drift_residuals(fluid, f);
    let mut value = 0.0;
    let mut residual = 0.0f64;
    let mut psi = Vec::with_capacity(u.len());
    for (k, (uk, sk)) in u.iter().zip(fluid.sigma()).enumerate() {
        let e = eigen(sk);
        let max = e.eigenvalues.max();
        let min = e.eigenvalues.min();
        if !(max > 0.0 && min > SIGMA_COND_TOL * max) {
            return Err(RateError::SigmaSingular {
                t: grid.time(k),
                min,
                max,
            });
        }
        let coords = e.eigenvectors.tr_mul(uk).component_div(&e.eigenvalues);
        let pk = &e.eigenvectors * coords;
        residual = residual.max((sk * &pk - uk).norm());
        value += trapezoid_weight(grid, k) * 0.5 * uk.dot(&pk);
        psi.push(pk);
    }
    Ok(RateReport {
        value: RateValue::Finite(value.max(0.0)),
        psi: Some(psi),
        residual,
        method: RateMethod::Closed,
        grid: grid.clone(),
    })
}

pub fn rate_degenerate(fluid: &FluidSolution, f: &CandidatePath) -> Result<RateReport, RateError> {
    rate_degenerate_with(fluid, f, &RateOptions::default())
}

/// Rate with the minimum-norm solution `psi` of `sigma psi = f' - b f`;
/// infinite when `f' - b f` leaves `range(sigma)`.
pub fn rate_degenerate_with(
    fluid: &FluidSolution,
    f: &CandidatePath,
    opts: &RateOptions,
) -> Result<RateReport, RateError> {
    check_grid(fluid, f.grid(), f.dimension())?;
    let grid = fluid.grid();
    let u = drift_residuals(fluid, f);
    let scale = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut value = 0.0;
    let mut residual = 0.0f64;
    let mut psi = Vec::with_capacity(u.len());
    for (k, (uk, sk)) in u.iter().zip(fluid.sigma()).enumerate() {
        let e = eigen(sk);
        let cutoff = opts.sv_cutoff * e.eigenvalues.amax();
        let mut pk = DVector::zeros(uk.len());
        for (i, &lam) in e.eigenvalues.iter().enumerate() {
            if lam > cutoff && lam > 0.0 {
                let v = e.eigenvectors.column(i);
                pk += v * (v.dot(uk) / lam);
            }
        }
        residual = residual.max((sk * &pk - uk).norm());
        value += trapezoid_weight(grid, k) * 0.5 * pk.dot(&(sk * &pk));
        psi.push(pk);
    }
    let reachable = residual <= opts.tol_range * scale;
    Ok(RateReport {
        value: if reachable {
            RateValue::Finite(value.max(0.0))
        } else {
            RateValue::Infinite
        },
        psi: reachable.then_some(psi),
        residual,
        method: RateMethod::Degenerate,
        grid: grid.clone(),
    })
}

/// Closed form when `sigma` is invertible along the path, otherwise the
/// degenerate formula.
pub fn rate(fluid: &FluidSolution, f: &CandidatePath) -> Result<RateReport, RateError> {
    match rate_closed_form(fluid, f) {
        Err(RateError::SigmaSingular { .. }) => rate_degenerate(fluid, f),
        other => other,
    }
}

/// Vectors `c_k` with `L1(g) = sum_k c_k . g_k` for every grid control `g`.
pub fn l1_coefficients(fluid: &FluidSolution, f: &CandidatePath) -> Result<Vec<DVector<f64>>, RateError> {
    check_grid(fluid, f.grid(), f.dimension())?;
    let grid = fluid.grid();
    let v = f.values();
    let m = grid.steps();
    let c = (0..=m)
        .map(|k| {
            let by_parts = if k == 0 {
                (&v[0] + &v[1]) * 0.5
            } else if k == m {
                (&v[m] - &v[m - 1]) * 0.5
            } else {
                (&v[k + 1] - &v[k - 1]) * 0.5
            };
            by_parts - (&fluid.b()[k] * &v[k]) * trapezoid_weight(grid, k)
        })
        .collect();
    Ok(c)
}

/// `(L1(g), L2(g))` with `L2(g) = int g^T sigma g`.
pub fn variational_terms(
    fluid: &FluidSolution,
    f: &CandidatePath,
    g: &TiltControl,
) -> Result<(f64, f64), RateError> {
    check_grid(fluid, g.grid(), g.dimension())?;
    let c = l1_coefficients(fluid, f)?;
    let grid = fluid.grid();
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for (k, gk) in g.values().iter().enumerate() {
        l1 += c[k].dot(gk);
        l2 += trapezoid_weight(grid, k) * gk.dot(&(&fluid.sigma()[k] * gk));
    }
    Ok((l1, l2))
}

/// `L1(g) - L2(g)/2`, a lower bound for `I(f)`.
pub fn variational_value(fluid: &FluidSolution, f: &CandidatePath, g: &TiltControl) -> Result<f64, RateError> {
    let (l1, l2) = variational_terms(fluid, f, g)?;
    Ok(l1 - 0.5 * l2)
}

/// Nonzero tent functions at time `t` for nodes `j T / m`.
fn tents(t: f64, t_end: f64, m: usize) -> [(usize, f64); 2] {
    let s = (t / t_end * m as f64).clamp(0.0, m as f64);
    let j = (s.floor() as usize).min(m - 1);
    let w = s - j as f64;
    [(j, 1.0 - w), (j + 1, w)]
}

/// Lower bound for `I(f)` from the best control in the span of `m + 1` tent
/// functions per coordinate. The quadratic problem is solved through a
/// pseudo-inverse, then `sweeps` rounds of coordinate ascent polish the
/// coefficients, and the optimal rescaling `L1^2 / (2 L2)` of the final
/// direction is reported. Tent spans are nested under doubling `m`.
pub fn variational_sup(
    fluid: &FluidSolution,
    f: &CandidatePath,
    m: usize,
    sweeps: usize,
) -> Result<RateReport, RateError> {
    if m == 0 {
        return Err(RateError::InvalidArgument("basis size must be at least 1".into()));
    }
    let c = l1_coefficients(fluid, f)?;
    let grid = fluid.grid();
    let d = fluid.dimension();
    let nb = d * (m + 1);
    let idx = |i: usize, j: usize| j * d + i;
    let mut a = DVector::zeros(nb);
    let mut q = DMatrix::zeros(nb, nb);
    for (k, t) in grid.times().enumerate() {
        let w = trapezoid_weight(grid, k);
        let s = &fluid.sigma()[k];
        let tk = tents(t, grid.t_end(), m);
        for &(j, pj) in &tk {
            for i in 0..d {
                a[idx(i, j)] += pj * c[k][i];
                for &(jj, pjj) in &tk {
                    for ii in 0..d {
                        q[(idx(i, j), idx(ii, jj))] += w * pj * pjj * s[(i, ii)];
                    }
                }
            }
        }
    }
    let e = eigen(&q);
    let cutoff = 1e-12 * e.eigenvalues.amax();
    let mut coef = DVector::zeros(nb);
    for (i, &lam) in e.eigenvalues.iter().enumerate() {
        if lam > cutoff && lam > 0.0 {
            let v = e.eigenvectors.column(i);
            coef += v * (v.dot(&a) / lam);
        }
    }
    for _ in 0..sweeps {
        for p in 0..nb {
            let qpp = q[(p, p)];
            if qpp > 0.0 {
                coef[p] += (a[p] - q.row(p).dot(&coef.transpose())) / qpp;
            }
        }
    }
    let values: Vec<DVector<f64>> = grid
        .times()
        .map(|t| {
            let mut g = DVector::zeros(d);
            for (j, pj) in tents(t, grid.t_end(), m) {
                for i in 0..d {
                    g[i] += pj * coef[idx(i, j)];
                }
            }
            g
        })
        .collect();
    let g = TiltControl::new(grid.clone(), values)?;
    let (l1, l2) = variational_terms(fluid, f, &g)?;
    let (value, scale) = if l2 > 0.0 { (0.5 * l1 * l1 / l2, l1 / l2) } else { (0.0, 0.0) };
    Ok(RateReport {
        value: RateValue::Finite(value),
        psi: Some(g.scaled(scale).values().to_vec()),
        residual: 0.0,
        method: RateMethod::VariationalLb,
        grid: grid.clone(),
    })
}

/// `psi = sigma^{-1}(f' - b f)` as a control; the tilt under which the
/// fluctuation mean follows `f`. Falls back to the minimum-norm `psi` when
/// `sigma` is singular but `f` is reachable.
pub fn optimal_tilt(fluid: &FluidSolution, f: &CandidatePath) -> Result<TiltControl, RateError> {
    let report = match rate_closed_form(fluid, f) {
        Err(singular @ RateError::SigmaSingular { .. }) => {
            let r = rate_degenerate(fluid, f)?;
            if !r.value.is_finite() {
                return Err(singular);
            }
            r
        }
        other => other?,
    };
    Ok(report.tilt().expect("finite rate carries psi"))
}

/// Cheapest path with `f(T) = z`: value `z^T Sigma_T^{-1} z / 2` and
/// `psi_s = Phi(T, s)^T Sigma_T^{-1} z`. Needs the fluctuation covariance.
pub fn endpoint_min_cost(fluid: &FluidSolution, z: &[f64]) -> Result<(CandidatePath, RateReport), RateError> {
    endpoint_min_cost_at(fluid, fluid.grid().steps(), z)
}

/// Cheapest path with `f(t_k) = z`; `psi` vanishes after `t_k`.
pub fn endpoint_min_cost_at(
    fluid: &FluidSolution,
    k: usize,
    z: &[f64],
) -> Result<(CandidatePath, RateReport), RateError> {
    let d = fluid.dimension();
    if z.len() != d {
        return Err(RateError::DimensionMismatch);
    }
    if k == 0 || k > fluid.grid().steps() {
        return Err(RateError::InvalidArgument(format!("target index {k} out of range")));
    }
    let cov = &fluid.sigma_ou().ok_or(FluidError::MissingCovariance)?[k];
    let e = eigen(cov);
    let (min, max) = (e.eigenvalues.min(), e.eigenvalues.max());
    if !(max > 0.0 && min > SIGMA_COND_TOL * max) {
        return Err(RateError::SingularEndpointCovariance { min, max });
    }
    let z = DVector::from_column_slice(z);
    let nu = &e.eigenvectors * e.eigenvectors.tr_mul(&z).component_div(&e.eigenvalues);
    let value = 0.5 * z.dot(&nu);
    let grid = fluid.grid().clone();
    if value == 0.0 {
        return Ok((
            CandidatePath::zeros(grid.clone(), d),
            RateReport {
                value: RateValue::Finite(0.0),
                psi: Some(vec![DVector::zeros(d); grid.len()]),
                residual: 0.0,
                method: RateMethod::Closed,
                grid,
            },
        ));
    }
    // Phi(t_k, s)^T = Phi(s, 0)^{-T} Phi(t_k, 0)^T
    let phi = fluid.propagator()?;
    let target = phi[k].transpose() * &nu;
    let psi: Vec<DVector<f64>> = phi
        .iter()
        .enumerate()
        .map(|(j, p)| {
            if j > k {
                return DVector::zeros(d);
            }
            p.transpose()
                .lu()
                .solve(&target)
                .expect("propagators of a linear ODE are invertible")
        })
        .collect();
    let tilt = TiltControl::new(grid.clone(), psi.clone())?;
    let mut path = solve_tilted_ode(fluid, &tilt)?;
    path[0].fill(0.0);
    let residual = (&path[k] - &z).amax();
    let f = CandidatePath::new(grid.clone(), path, None)?;
    Ok((
        f,
        RateReport {
            value: RateValue::Finite(value),
            psi: Some(psi),
            residual,
            method: RateMethod::Closed,
            grid,
        },
    ))
}
