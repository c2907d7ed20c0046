//! Closed-form fluid paths of the reference models, written independently of
//! the numerical integrator so they can check it.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::FluidError;
use crate::model::{builtin, Builtin};

/// Oracle output at one time. Matrices are present where a closed form is
/// known.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleValues {
    pub x: Vec<f64>,
    pub b: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma_inv: Option<DMatrix<f64>>,
}

/// Prepared oracle for one reference model and parameter set.
#[derive(Clone, Debug)]
pub struct ClosedForm {
    kind: Builtin,
    p: BTreeMap<String, f64>,
    roots: Option<(f64, f64)>,
}

/// Relative gap below which the two chemical roots count as equal.
const ROOT_GAP_TOL: f64 = 1e-9;

impl ClosedForm {
    pub fn new(kind: Builtin, params: &BTreeMap<String, f64>) -> Result<Self, FluidError> {
        let spec = builtin(kind, params)?;
        let p = spec.params;
        let mut roots = None;
        if kind == Builtin::Chemical {
            let (lambda, mu) = (p["lambda"], p["mu"]);
            let (x0, y0, z0) = (p["x0"], p["y0"], p["z0"]);
            // c^2 + (y0 - x0 + mu/lambda) c - mu (x0 + z0) / lambda = 0
            let bq = y0 - x0 + mu / lambda;
            let cq = -mu * (x0 + z0) / lambda;
            let disc = bq * bq - 4.0 * cq;
            if disc < 0.0 {
                return Err(FluidError::ParamsOutOfRange("complex roots".into()));
            }
            let s = disc.sqrt();
            // larger root first; the stable form avoids cancellation
            let sign = if bq >= 0.0 { 1.0 } else { -1.0 };
            let q = -0.5 * (bq + sign * s);
            let (r1, r2) = if q != 0.0 { (q, cq / q) } else { (0.5 * s, -0.5 * s) };
            let (c1, c2) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
            if (c1 - c2).abs() <= ROOT_GAP_TOL * c1.abs().max(c2.abs()).max(1.0) {
                return Err(FluidError::ParamsOutOfRange("chemical roots coincide".into()));
            }
            roots = Some((c1, c2));
        }
        Ok(Self { kind, p, roots })
    }

    pub fn kind(&self) -> Builtin {
        self.kind
    }

    pub fn eval(&self, t: f64) -> Result<OracleValues, FluidError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(FluidError::ParamsOutOfRange(format!("t = {t}")));
        }
        let p = |k: &str| self.p[k];
        Ok(match self.kind {
            Builtin::Yule => {
                let (lambda, x0) = (p("lambda"), p("x0"));
                let x = x0 * (lambda * t).exp();
                OracleValues {
                    x: vec![x],
                    b: DMatrix::from_element(1, 1, lambda),
                    sigma: DMatrix::from_element(1, 1, lambda * x),
                    sigma_inv: (x > 0.0).then(|| DMatrix::from_element(1, 1, 1.0 / (lambda * x))),
                }
            }
            Builtin::Contact => {
                let (lambda, x0) = (p("lambda"), p("x0"));
                let x = if lambda == 1.0 {
                    x0 / (x0 * t + 1.0)
                } else {
                    let e = ((lambda - 1.0) * t).exp();
                    (lambda - 1.0) * x0 * e / ((lambda - 1.0) - lambda * x0 + lambda * x0 * e)
                };
                let sigma = x * (lambda + 1.0 - lambda * x);
                OracleValues {
                    x: vec![x],
                    b: DMatrix::from_element(1, 1, lambda - 2.0 * lambda * x - 1.0),
                    sigma: DMatrix::from_element(1, 1, sigma),
                    sigma_inv: (sigma > 0.0).then(|| DMatrix::from_element(1, 1, 1.0 / sigma)),
                }
            }
            Builtin::Sir => {
                let (lambda, x0, y0) = (p("lambda"), p("x0"), p("y0"));
                let phi = sir_phi(lambda, x0, y0, t);
                let s = x0 * (-lambda * phi).exp();
                let i = -phi + y0 + x0 * (1.0 - (-lambda * phi).exp());
                let lsi = lambda * s * i;
                let sigma_inv = (lsi > 0.0).then(|| {
                    DMatrix::from_row_slice(2, 2, &[lsi + i, lsi, lsi, lsi]) / (lambda * s * i * i)
                });
                OracleValues {
                    x: vec![s, i],
                    b: DMatrix::from_row_slice(2, 2, &[-lambda * i, -lambda * s, lambda * i, lambda * s - 1.0]),
                    sigma: DMatrix::from_row_slice(2, 2, &[lsi, -lsi, -lsi, lsi + i]),
                    sigma_inv,
                }
            }
            Builtin::Chemical => {
                let (lambda, mu) = (p("lambda"), p("mu"));
                let (x0, y0, z0) = (p("x0"), p("y0"), p("z0"));
                let (c1, c2) = self.roots.expect("roots are computed for the chemical model");
                let x1 = chemical_x1(lambda, x0, c1, c2, t);
                let x2 = x1 + y0 - x0;
                let x3 = x0 + z0 - x1;
                let r = lambda * x1 * x2 + mu * x3;
                OracleValues {
                    x: vec![x1, x2, x3],
                    b: DMatrix::from_row_slice(
                        3,
                        3,
                        &[
                            -lambda * x2, -lambda * x1, mu,
                            -lambda * x2, -lambda * x1, mu,
                            lambda * x2, lambda * x1, -mu,
                        ],
                    ),
                    sigma: DMatrix::from_row_slice(3, 3, &[r, r, -r, r, r, -r, -r, -r, r]),
                    sigma_inv: None,
                }
            }
        })
    }
}

/// One-shot convenience wrapper around [`ClosedForm`].
pub fn closed_form_oracle(
    kind: Builtin,
    params: &BTreeMap<String, f64>,
    t: f64,
) -> Result<OracleValues, FluidError> {
    ClosedForm::new(kind, params)?.eval(t)
}

/// `phi' = -phi + y0 + x0 (1 - e^{-lambda phi})`, `phi(0) = 0`, by RK4 with a
/// step small enough that the global error sits near `1e-13`.
fn sir_phi(lambda: f64, x0: f64, y0: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let rhs = |phi: f64| -phi + y0 + x0 * (1.0 - (-lambda * phi).exp());
    let steps = ((t / 1e-4).ceil() as usize).max(16);
    let h = t / steps as f64;
    let mut phi = 0.0;
    for _ in 0..steps {
        let k1 = rhs(phi);
        let k2 = rhs(phi + 0.5 * h * k1);
        let k3 = rhs(phi + 0.5 * h * k2);
        let k4 = rhs(phi + h * k3);
        phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    phi
}

/// Solves `ln|x - c1| - ln|x - c2| = ln|x0 - c1| - ln|x0 - c2| - lambda (c1 - c2) t`
/// for `x` between `x0` and the attractor `c1`. The sign of
/// `(x - c1)/(x - c2)` is fixed along the flow, so the bracket is exact.
fn chemical_x1(lambda: f64, x0: f64, c1: f64, c2: f64, t: f64) -> f64 {
    if x0 == c1 || t == 0.0 {
        return x0;
    }
    let target = ((x0 - c1).abs().ln() - (x0 - c2).abs().ln()) - lambda * (c1 - c2) * t;
    let h = |x: f64| (x - c1).abs().ln() - (x - c2).abs().ln() - target;
    // h(x0) = lambda (c1 - c2) t > 0 and h -> -inf at c1
    let (mut a, mut b) = (x0, c1);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= 1e-12 || m == a || m == b {
            break;
        }
        if h(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
