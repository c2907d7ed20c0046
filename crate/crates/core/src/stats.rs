//! Small statistics toolkit for the Monte Carlo checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Neumaier-compensated running sum. Summing the same values in the same
/// order always gives the same bits.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn kahan_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<KahanSum>().value()
}

/// Sample mean and its standard error (`sd / sqrt(len)`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = kahan_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).collect::<KahanSum>().value() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = kahan_sum(xs) / n as f64;
    xs.iter().map(|x| (x - mean).powi(2)).collect::<KahanSum>().value() / (n - 1) as f64
}

/// Kish effective sample size `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = kahan_sum(weights);
    let s2 = weights.iter().map(|w| w * w).collect::<KahanSum>().value();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Kolmogorov survival function `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // the alternating series converges slowly here; the survival is 1
        // to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample two-sided Kolmogorov-Smirnov test. The p-value uses the
/// asymptotic distribution with Stephens' small-sample correction.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult, StatsError> {
    let n = sample.len();
    if n < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: n });
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(StatsError::Invalid("sample contains NaN".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let sq = nf.sqrt();
    let p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsResult {
        statistic: d,
        p_value,
        n,
    })
}

pub fn ks_test_normal(sample: &[f64]) -> Result<KsResult, StatsError> {
    ks_test(sample, normal_cdf)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins after pooling.
    pub bins: usize,
}

/// Pearson goodness of fit of `observed` counts against cell
/// probabilities `expected_prob` (which should sum to 1 over all cells,
/// including any tail cell). Adjacent cells are pooled from the right until
/// each expected count is at least `min_expected`.
pub fn chi_square_gof(observed: &[u64], expected_prob: &[f64], min_expected: f64) -> Result<ChiSquareResult, StatsError> {
    if observed.len() != expected_prob.len() {
        return Err(StatsError::Invalid("observed and expected lengths differ".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    let nf = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_prob).rev() {
        o_acc += o as f64;
        e_acc += p * nf;
        if e_acc >= min_expected {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    if cells.len() < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: cells.len() });
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| StatsError::Invalid(e.to_string()))?;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        bins: cells.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Two-sided p-value for slope = 0.
    pub p_two_sided: f64,
    /// One-sided p-value against slope < 0.
    pub p_negative: f64,
}

/// Ordinary least squares `y = a + b x` with a Student-t test on `b`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<Regression, StatsError> {
    let n = x.len();
    if n != y.len() {
        return Err(StatsError::Invalid("x and y lengths differ".into()));
    }
    if n < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = kahan_sum(x) / nf;
    let my = kahan_sum(y) / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::Invalid("x has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = nf - 2.0;
    let slope_stderr = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| StatsError::Invalid(e.to_string()))?;
    let (p_two_sided, p_negative) = if slope_stderr == 0.0 {
        let sign = slope.signum();
        (if slope == 0.0 { 1.0 } else { 0.0 }, if sign < 0.0 { 0.0 } else { 1.0 })
    } else {
        let ts = slope / slope_stderr;
        (2.0 * t.sf(ts.abs()), t.cdf(ts))
    };
    Ok(Regression {
        slope,
        intercept,
        slope_stderr,
        p_two_sided,
        p_negative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive() {
        let mut xs = vec![1.0];
        xs.extend(std::iter::repeat_n(1e-16, 10_000));
        assert!((kahan_sum(&xs) - (1.0 + 1e-12)).abs() < 1e-20);
    }

    #[test]
    fn ess_of_equal_weights() {
        assert_eq!(effective_sample_size(&[2.0; 50]), 50.0);
        assert_eq!(effective_sample_size(&[0.0, 0.0]), 0.0);
        assert!((effective_sample_size(&[1.0, 0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // P(K > 1.36) ~ 0.049, P(K > 1.63) ~ 0.0098
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(1.63) - 0.0098).abs() < 5e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_statistic_on_uniform_grid() {
        // evenly spread quantiles of U(0,1): D = 1/n
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let r = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((r.statistic - 0.05).abs() < 1e-12);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn chi_square_pooling() {
        let r = chi_square_gof(&[50, 30, 15, 4, 1], &[0.5, 0.3, 0.15, 0.04, 0.01], 5.0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.bins, 4);
    }

    #[test]
    fn regression_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.1, 3.9, 6.1, 7.9, 10.1];
        let r = linear_regression(&x, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 0.05);
        assert!(r.p_two_sided < 1e-4);
        assert!(r.p_negative > 0.99);
    }
}
