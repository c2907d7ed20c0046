//! Sparse multivariate polynomials used as jump-rate functions.

use serde::{Deserialize, Serialize};

/// One term `coeff * x_1^e_1 * ... * x_d^e_d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

impl Monomial {
    pub fn new(exponents: Vec<u32>, coeff: f64) -> Self {
        Self { exponents, coeff }
    }

    pub fn is_constant(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.coeff;
        for (&e, &xi) in self.exponents.iter().zip(x) {
            v *= powu(xi, e);
        }
        v
    }
}

#[inline]
fn powu(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

/// A polynomial over `R^d` stored as a list of monomials.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// Builds `coeff * prod x_i^{e_i}` as a single-term polynomial.
    pub fn monomial(exponents: &[u32], coeff: f64) -> Self {
        Self {
            terms: vec![Monomial::new(exponents.to_vec(), coeff)],
        }
    }

    pub fn plus(mut self, exponents: &[u32], coeff: f64) -> Self {
        self.terms.push(Monomial::new(exponents.to_vec(), coeff));
        self
    }

    /// Sum of the coefficients of all constant monomials.
    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .filter(|m| m.is_constant())
            .map(|m| m.coeff)
            .sum()
    }

    pub fn is_identically_zero(&self) -> bool {
        self.terms.iter().all(|m| m.coeff == 0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|m| m.eval(x)).sum()
    }

    /// Analytic gradient, written into `out` (length d).
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for m in &self.terms {
            for (i, &ei) in m.exponents.iter().enumerate() {
                if ei == 0 {
                    continue;
                }
                let mut v = m.coeff * f64::from(ei);
                for (j, (&ej, &xj)) in m.exponents.iter().zip(x).enumerate() {
                    let e = if j == i { ej - 1 } else { ej };
                    v *= powu(xj, e);
                }
                out[i] += v;
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Checks that every monomial has exactly `dim` exponents.
    pub fn has_dimension(&self, dim: usize) -> bool {
        self.terms.iter().all(|m| m.exponents.len() == dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_rate_and_gradient() {
        // 2x - 2x^2
        let p = Polynomial::monomial(&[1], 2.0).plus(&[2], -2.0);
        assert_eq!(p.eval(&[0.5]), 0.5);
        assert_eq!(p.gradient(&[0.5]), vec![0.0]);
        assert_eq!(p.constant_term(), 0.0);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn bilinear_gradient() {
        let p = Polynomial::monomial(&[1, 1, 0], 3.0);
        assert_eq!(p.eval(&[0.4, 0.2, 9.0]), 3.0 * 0.4 * 0.2);
        let g = p.gradient(&[0.4, 0.2, 9.0]);
        assert!((g[0] - 0.6).abs() < 1e-15);
        assert!((g[1] - 1.2).abs() < 1e-15);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn constant_term_is_detected() {
        let p = Polynomial::monomial(&[1], 1.0).plus(&[0], 0.1);
        assert_eq!(p.constant_term(), 0.1);
        assert_eq!(p.eval(&[0.0]), 0.1);
    }
}
