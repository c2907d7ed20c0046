//! Density-dependent Markov chain specifications.
//!
//! A model is a finite jump set `A` in `Z^d`, one polynomial rate `F_l` per
//! jump, a convex domain `G` and a start density `x0`. At scale `n` the chain
//! lives on `nG` and jumps by `l` at rate `n F_l(X / n)`.

mod builtin;
mod config;
mod domain;
mod poly;

pub use builtin::{builtin, Builtin};
pub use config::{load_model_config, parse_model_config, ConfigError, ModelConfig};
pub use domain::{BoxBounds, Domain, HalfSpace};
pub use poly::{Monomial, Polynomial};

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Negative rate evaluations down to this magnitude are floating-point noise
/// and get clamped to zero.
pub const RATE_CLAMP_TOL: f64 = 1e-12;

/// Allowed constraint violation when testing `x in G`.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Scales tested by the lattice boundary check.
const BOUNDARY_TEST_SCALES: [u64; 11] = [1, 2, 3, 4, 5, 7, 8, 10, 16, 32, 100];

/// Lattice enumeration is used when the box holds at most this many points.
const LATTICE_ENUM_CAP: u64 = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("jump set is empty")]
    EmptyJumpSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{jumps} jumps but {rates} rate polynomials")]
    RateCountMismatch { jumps: usize, rates: usize },
    #[error("jump #{0} is the zero vector")]
    ZeroJump(usize),
    #[error("rate for jump {jump:?} has nonzero constant term {value}")]
    NonzeroConstantTerm { jump: Vec<i64>, value: f64 },
    #[error("rate for jump {jump:?} is negative ({value:e}) at x = {x:?}")]
    NegativeRateAt {
        x: Vec<f64>,
        jump: Vec<i64>,
        value: f64,
    },
    #[error("jump {jump:?} leaves the domain from x = {x:?} at scale n = {n} but has rate {value:e}")]
    BoundaryLeak {
        x: Vec<f64>,
        jump: Vec<i64>,
        n: u64,
        value: f64,
    },
    #[error("start density {0:?} lies outside the domain")]
    StartOutsideDomain(Vec<f64>),
    #[error("start density is the zero vector")]
    ZeroStart,
    #[error("point {x:?} violates the domain by {violation:e}")]
    OutsideDomain { x: Vec<f64>, violation: f64 },
    #[error("unknown builtin model `{0}`")]
    UnknownName(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
}

/// Raw, unchecked model description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub dimension: usize,
    pub jumps: Vec<Vec<i64>>,
    pub rates: Vec<Polynomial>,
    pub domain: Domain,
    pub x0: Vec<f64>,
}

/// Upper bound on `||grad F_l||_1` over the validation sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    pub k1: f64,
}

/// A model that passed [`validate_model`]. Immutable and cheap to share.
#[derive(Clone, Debug)]
pub struct ValidatedModel {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    spec: ModelSpec,
    lipschitz: LipschitzEstimate,
    samples: Vec<Vec<f64>>,
    jump_vectors: Vec<Vec<f64>>,
}

impl ValidatedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.inner.spec
    }

    pub fn name(&self) -> &str {
        &self.inner.spec.name
    }

    pub fn dimension(&self) -> usize {
        self.inner.spec.dimension
    }

    pub fn num_jumps(&self) -> usize {
        self.inner.spec.jumps.len()
    }

    pub fn jumps(&self) -> &[Vec<i64>] {
        &self.inner.spec.jumps
    }

    /// Jump vectors as floats, in jump order.
    pub fn jump_vectors(&self) -> &[Vec<f64>] {
        &self.inner.jump_vectors
    }

    pub fn domain(&self) -> &Domain {
        &self.inner.spec.domain
    }

    pub fn x0(&self) -> &[f64] {
        &self.inner.spec.x0
    }

    pub fn lipschitz(&self) -> LipschitzEstimate {
        self.inner.lipschitz
    }

    /// Validation sample of `G` (deterministic).
    pub fn samples(&self) -> &[Vec<f64>] {
        &self.inner.samples
    }

    fn check_domain(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.dimension() {
            return Err(ModelError::DimensionMismatch(format!(
                "point has {} coordinates, model has {}",
                x.len(),
                self.dimension()
            )));
        }
        let violation = self.domain().violation(x);
        if violation > DOMAIN_TOL || violation.is_nan() {
            return Err(ModelError::OutsideDomain {
                x: x.to_vec(),
                violation,
            });
        }
        Ok(())
    }

    /// `F_l(x)` for every jump, without the domain check. Small negative
    /// values are clamped to zero.
    #[inline]
    pub fn rates_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.inner.spec.rates) {
            let v = p.eval(x);
            *o = if v < 0.0 && v >= -RATE_CLAMP_TOL { 0.0 } else { v };
        }
    }

    /// `{F_l(x)}` in jump order.
    pub fn eval_rates(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_domain(x)?;
        let mut out = vec![0.0; self.num_jumps()];
        self.rates_into(x, &mut out);
        Ok(out)
    }

    /// `sum_l l F_l(x)` without the domain check (used inside integrators,
    /// whose intermediate stages may step marginally outside `G`).
    pub fn drift_unchecked(&self, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dimension());
        for (l, p) in self.jump_vectors().iter().zip(&self.inner.spec.rates) {
            let f = p.eval(x);
            for (o, li) in out.iter_mut().zip(l) {
                *o += li * f;
            }
        }
        out
    }

    pub fn drift(&self, x: &[f64]) -> Result<DVector<f64>, ModelError> {
        self.check_domain(x)?;
        Ok(self.drift_unchecked(x))
    }

    /// `sum_l l (grad F_l(x))^T`, the Jacobian of the drift.
    pub fn b_matrix_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dimension();
        let mut out = DMatrix::zeros(d, d);
        let mut grad = vec![0.0; d];
        for (l, p) in self.jump_vectors().iter().zip(&self.inner.spec.rates) {
            p.gradient_into(x, &mut grad);
            for i in 0..d {
                if l[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[(i, j)] += l[i] * grad[j];
                }
            }
        }
        out
    }

    pub fn b_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        self.check_domain(x)?;
        Ok(self.b_matrix_unchecked(x))
    }

    /// `sum_l F_l(x) l l^T`.
    pub fn sigma_matrix_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dimension();
        let mut out = DMatrix::zeros(d, d);
        let mut rates = vec![0.0; self.num_jumps()];
        self.rates_into(x, &mut rates);
        for (l, &f) in self.jump_vectors().iter().zip(&rates) {
            if f == 0.0 {
                continue;
            }
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += f * l[i] * l[j];
                }
            }
        }
        out
    }

    pub fn sigma_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        self.check_domain(x)?;
        Ok(self.sigma_matrix_unchecked(x))
    }

    /// Total `sum_l F_l(x)`.
    pub fn total_rate(&self, x: &[f64]) -> f64 {
        let mut rates = vec![0.0; self.num_jumps()];
        self.rates_into(x, &mut rates);
        rates.iter().sum()
    }
}

/// Checks the structural assumptions on a model and returns a shareable,
/// validated wrapper. Every violation found is reported.
///
/// Nonnegativity and boundary consistency are checked on a deterministic
/// sample: `samples` Halton points of `G`, the box corners and `x0`, plus
/// lattice points of `nG` for a fixed set of small scales `n`.
pub fn validate_model(spec: ModelSpec, samples: usize) -> Result<ValidatedModel, Vec<ModelError>> {
    let mut errors = Vec::new();
    let d = spec.dimension;

    if spec.jumps.is_empty() {
        errors.push(ModelError::EmptyJumpSet);
    }
    if d == 0 {
        errors.push(ModelError::DimensionMismatch("dimension must be positive".into()));
    }
    if spec.rates.len() != spec.jumps.len() {
        errors.push(ModelError::RateCountMismatch {
            jumps: spec.jumps.len(),
            rates: spec.rates.len(),
        });
    }
    for (i, l) in spec.jumps.iter().enumerate() {
        if l.len() != d {
            errors.push(ModelError::DimensionMismatch(format!(
                "jump #{i} has {} components, expected {d}",
                l.len()
            )));
        } else if l.iter().all(|&v| v == 0) {
            errors.push(ModelError::ZeroJump(i));
        }
    }
    for (i, p) in spec.rates.iter().enumerate() {
        if !p.has_dimension(d) {
            errors.push(ModelError::DimensionMismatch(format!(
                "rate #{i} has monomials with the wrong number of exponents"
            )));
        }
    }
    if !spec.domain.has_dimension(d) {
        errors.push(ModelError::DimensionMismatch("domain constraints".into()));
    }
    if spec.x0.len() != d {
        errors.push(ModelError::DimensionMismatch(format!(
            "x0 has {} components, expected {d}",
            spec.x0.len()
        )));
    }
    // structural errors make the numeric checks meaningless
    if !errors.is_empty() {
        return Err(errors);
    }

    for (l, p) in spec.jumps.iter().zip(&spec.rates) {
        let c = p.constant_term();
        if c != 0.0 {
            errors.push(ModelError::NonzeroConstantTerm {
                jump: l.clone(),
                value: c,
            });
        }
    }
    if spec.x0.iter().all(|&v| v == 0.0) {
        errors.push(ModelError::ZeroStart);
    }
    if !spec.domain.contains(&spec.x0, DOMAIN_TOL) {
        errors.push(ModelError::StartOutsideDomain(spec.x0.clone()));
    }

    let sample = sample_domain(&spec, samples.max(1));

    let jump_vectors: Vec<Vec<f64>> = spec
        .jumps
        .iter()
        .map(|l| l.iter().map(|&v| v as f64).collect())
        .collect();

    // nonnegativity on the continuous sample
    let mut flagged_negative = vec![false; spec.jumps.len()];
    for x in &sample {
        for (j, p) in spec.rates.iter().enumerate() {
            let v = p.eval(x);
            if v < -RATE_CLAMP_TOL && !flagged_negative[j] {
                flagged_negative[j] = true;
                errors.push(ModelError::NegativeRateAt {
                    x: x.clone(),
                    jump: spec.jumps[j].clone(),
                    value: v,
                });
            }
        }
    }

    // boundary consistency on lattice points of nG
    let mut flagged_leak = vec![false; spec.jumps.len()];
    for &n in &BOUNDARY_TEST_SCALES {
        for state in lattice_points(&spec, &sample, n) {
            let x: Vec<f64> = state.iter().map(|&s| s as f64 / n as f64).collect();
            for (j, (l, p)) in spec.jumps.iter().zip(&spec.rates).enumerate() {
                if flagged_leak[j] {
                    continue;
                }
                let next: Vec<i64> = state.iter().zip(l).map(|(s, li)| s + li).collect();
                if spec.domain.contains_scaled(&next, n as f64, 1e-12) {
                    continue;
                }
                let v = p.eval(&x);
                if v > leak_tolerance(p) {
                    flagged_leak[j] = true;
                    errors.push(ModelError::BoundaryLeak {
                        x,
                        jump: l.clone(),
                        n,
                        value: v,
                    });
                    break;
                }
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let mut k1: f64 = 0.0;
    let mut grad = vec![0.0; d];
    for x in &sample {
        for p in &spec.rates {
            p.gradient_into(x, &mut grad);
            k1 = k1.max(grad.iter().map(|g| g.abs()).sum());
        }
    }

    Ok(ValidatedModel {
        inner: Arc::new(Inner {
            spec,
            lipschitz: LipschitzEstimate { k1 },
            samples: sample,
            jump_vectors,
        }),
    })
}

fn leak_tolerance(p: &Polynomial) -> f64 {
    let scale: f64 = p.terms.iter().map(|m| m.coeff.abs()).sum();
    RATE_CLAMP_TOL * scale.max(1.0)
}

/// Scale used to truncate unbounded sides of the domain for sampling.
pub(crate) fn sampling_scale(x0: &[f64]) -> f64 {
    let m = x0.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    (4.0 * m).max(1.0)
}

fn sample_domain(spec: &ModelSpec, samples: usize) -> Vec<Vec<f64>> {
    sample_domain_with_scale(spec, samples, sampling_scale(&spec.x0))
}

/// Halton points of the sampling box that fall inside `G`, plus corners, the
/// origin and `x0`.
pub(crate) fn sample_domain_with_scale(spec: &ModelSpec, samples: usize, scale: f64) -> Vec<Vec<f64>> {
    let d = spec.dimension;
    let (lo, hi) = spec.domain.sampling_box(d, scale);
    let mut out = Vec::with_capacity(samples + (1 << d.min(10)) + 2);

    let inside = |x: &[f64]| spec.domain.contains(x, 0.0);
    if inside(&spec.x0) {
        out.push(spec.x0.clone());
    }
    let origin = vec![0.0; d];
    if inside(&origin) {
        out.push(origin);
    }
    if d <= 10 {
        for mask in 0..(1usize << d) {
            let c: Vec<f64> = (0..d)
                .map(|i| if mask & (1 << i) != 0 { hi[i] } else { lo[i] })
                .collect();
            if inside(&c) {
                out.push(c);
            }
        }
    }

    let mut accepted = 0;
    let mut index = 1u64;
    let max_tries = 50 * samples as u64 + 100;
    while accepted < samples && index <= max_tries {
        let x: Vec<f64> = (0..d)
            .map(|i| lo[i] + (hi[i] - lo[i]) * halton(index, PRIMES[i % PRIMES.len()]))
            .collect();
        index += 1;
        if inside(&x) {
            out.push(x);
            accepted += 1;
        }
    }
    out
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical-inverse of `index` in base `base`.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Integer states of `nG` to test for boundary consistency: a full
/// enumeration when the box is small, otherwise the continuous sample
/// rounded (and snapped to the box faces) onto the lattice.
fn lattice_points(spec: &ModelSpec, sample: &[Vec<f64>], n: u64) -> Vec<Vec<i64>> {
    let d = spec.dimension;
    let nf = n as f64;
    let (lo, hi) = spec.domain.sampling_box(d, sampling_scale(&spec.x0));
    let lo_i: Vec<i64> = lo.iter().map(|v| (v * nf).ceil() as i64).collect();
    let hi_i: Vec<i64> = hi.iter().map(|v| (v * nf).floor() as i64).collect();
    let count: u64 = lo_i
        .iter()
        .zip(&hi_i)
        .map(|(a, b)| (b - a + 1).max(0) as u64)
        .try_fold(1u64, |acc, c| acc.checked_mul(c))
        .unwrap_or(u64::MAX);

    let mut out = Vec::new();
    if count <= LATTICE_ENUM_CAP {
        let mut cur = lo_i.clone();
        if lo_i.iter().zip(&hi_i).any(|(a, b)| a > b) {
            return out;
        }
        loop {
            if spec.domain.contains_scaled(&cur, nf, 1e-12) {
                out.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == d {
                    return out;
                }
                cur[i] += 1;
                if cur[i] <= hi_i[i] {
                    break;
                }
                cur[i] = lo_i[i];
                i += 1;
            }
        }
    }

    for x in sample {
        let base: Vec<i64> = x.iter().map(|v| (v * nf).round() as i64).collect();
        // the rounded point and its snaps onto each lower/upper face
        let mut candidates = vec![base.clone()];
        for i in 0..d {
            let mut a = base.clone();
            a[i] = lo_i[i];
            candidates.push(a);
            let mut b = base.clone();
            b[i] = hi_i[i];
            candidates.push(b);
        }
        for c in candidates {
            if spec.domain.contains_scaled(&c, nf, 1e-12) {
                out.push(c);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn model(kind: Builtin, p: &[(&str, f64)]) -> ValidatedModel {
        validate_model(builtin(kind, &params(p)).unwrap(), 256).unwrap()
    }

    #[test]
    fn yule_is_valid() {
        let m = model(Builtin::Yule, &[("lambda", 1.0), ("x0", 1.0)]);
        assert_eq!(m.jumps(), &[vec![1]]);
        assert!(m.lipschitz().k1 >= 1.0);
    }

    #[test]
    fn constant_term_is_rejected() {
        let mut spec = builtin(Builtin::Contact, &params(&[("lambda", 2.0)])).unwrap();
        spec.rates[0] = spec.rates[0].clone().plus(&[0], 0.1);
        let errs = validate_model(spec, 64).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ModelError::NonzeroConstantTerm { jump, .. } if jump == &vec![1])));
    }

    #[test]
    fn contact_boundary_is_consistent() {
        let m = model(Builtin::Contact, &[("lambda", 2.0)]);
        // F_1(1) = 0 so infection cannot push past the full graph
        assert_eq!(m.eval_rates(&[1.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn boundary_leak_is_detected() {
        // infection rate that does not vanish at x = 1
        let mut spec = builtin(Builtin::Contact, &params(&[("lambda", 2.0)])).unwrap();
        spec.rates[0] = Polynomial::monomial(&[1], 2.0);
        let errs = validate_model(spec, 64).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ModelError::BoundaryLeak { jump, .. } if jump == &vec![1])));
    }

    #[test]
    fn negative_rate_is_detected() {
        let mut spec = builtin(Builtin::Yule, &params(&[])).unwrap();
        spec.rates[0] = Polynomial::monomial(&[1], -1.0);
        let errs = validate_model(spec, 64).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, ModelError::NegativeRateAt { .. })));
    }

    #[test]
    fn start_checks() {
        let mut spec = builtin(Builtin::Contact, &params(&[])).unwrap();
        spec.x0 = vec![1.5];
        let errs = validate_model(spec.clone(), 16).unwrap_err();
        assert!(errs.contains(&ModelError::StartOutsideDomain(vec![1.5])));
        spec.x0 = vec![0.0];
        let errs = validate_model(spec, 16).unwrap_err();
        assert!(errs.contains(&ModelError::ZeroStart));
    }

    #[test]
    fn empty_jump_set() {
        let mut spec = builtin(Builtin::Yule, &params(&[])).unwrap();
        spec.jumps.clear();
        spec.rates.clear();
        let errs = validate_model(spec, 16).unwrap_err();
        assert_eq!(errs, vec![ModelError::EmptyJumpSet]);
    }

    #[test]
    fn contact_rates_and_drift() {
        let m = model(Builtin::Contact, &[("lambda", 2.0)]);
        assert_eq!(m.eval_rates(&[0.5]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(m.drift(&[0.5]).unwrap()[0], 0.0);
        assert_eq!(m.eval_rates(&[0.0]).unwrap(), vec![0.0, 0.0]);
        let m1 = model(Builtin::Contact, &[("lambda", 1.0)]);
        assert_eq!(m1.drift(&[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn sir_rates_and_b() {
        let m = model(Builtin::Sir, &[("lambda", 3.0)]);
        let r = m.eval_rates(&[0.4, 0.2]).unwrap();
        assert_eq!(m.jumps(), &[vec![0, -1], vec![-1, 1]]);
        assert!((r[0] - 0.2).abs() < 1e-15);
        assert!((r[1] - 0.24).abs() < 1e-15);
        let b = m.b_matrix(&[0.4, 0.2]).unwrap();
        let expected = [[-0.6, -1.2], [0.6, 0.2]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((b[(i, j)] - expected[i][j]).abs() < 1e-14, "{b}");
            }
        }
    }

    #[test]
    fn yule_drift_and_b() {
        let m = model(Builtin::Yule, &[("lambda", 2.0)]);
        assert_eq!(m.drift(&[3.0]).unwrap()[0], 6.0);
        assert_eq!(m.b_matrix(&[7.0]).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn contact_b_and_sigma_closed_forms() {
        let lambda = 2.0;
        let m = model(Builtin::Contact, &[("lambda", lambda)]);
        for &x in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            let b = m.b_matrix(&[x]).unwrap()[(0, 0)];
            assert!((b - (lambda - 2.0 * lambda * x - 1.0)).abs() < 1e-14);
            let s = m.sigma_matrix(&[x]).unwrap()[(0, 0)];
            assert!((s - x * (lambda + 1.0 - lambda * x)).abs() < 1e-14);
        }
        assert_eq!(m.sigma_matrix(&[0.5]).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn chemical_sigma_is_rank_one() {
        let (l, mu) = (1.5, 0.7);
        let m = model(Builtin::Chemical, &[("lambda", l), ("mu", mu)]);
        let x = [0.3, 0.2, 0.1];
        let s = m.sigma_matrix(&x).unwrap();
        let v = l * x[0] * x[1] + mu * x[2];
        let sign = [1.0, 1.0, -1.0];
        for i in 0..3 {
            for j in 0..3 {
                assert!((s[(i, j)] - sign[i] * sign[j] * v).abs() < 1e-15);
            }
        }
        assert!(m.sigma_matrix(&[0.0, 0.0, 0.0]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outside_domain_is_an_error() {
        let m = model(Builtin::Contact, &[("lambda", 2.0)]);
        assert!(matches!(m.eval_rates(&[1.2]), Err(ModelError::OutsideDomain { .. })));
        assert!(matches!(m.drift(&[-0.1]), Err(ModelError::OutsideDomain { .. })));
    }

    #[test]
    fn halton_is_low_discrepancy() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }
}
