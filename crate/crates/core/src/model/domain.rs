//! Convex state domains: intersections of half-spaces and an optional box.

use serde::{Deserialize, Serialize};

/// `a . x <= c`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub a: Vec<f64>,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    #[serde(default)]
    pub halfspaces: Vec<HalfSpace>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoxBounds>,
}

impl Domain {
    /// The nonnegative orthant intersected with `sum_i w_i x_i <= 1`.
    pub fn weighted_simplex(weights: &[f64]) -> Self {
        let d = weights.len();
        Self {
            halfspaces: vec![HalfSpace {
                a: weights.to_vec(),
                c: 1.0,
            }],
            bounds: Some(BoxBounds {
                lower: vec![0.0; d],
                upper: vec![f64::INFINITY; d],
            }),
        }
    }

    pub fn interval(lower: f64, upper: f64) -> Self {
        Self {
            halfspaces: Vec::new(),
            bounds: Some(BoxBounds {
                lower: vec![lower],
                upper: vec![upper],
            }),
        }
    }

    /// Largest constraint violation at `x`; zero or negative inside.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for h in &self.halfspaces {
            let v: f64 = h.a.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() - h.c;
            worst = worst.max(v);
        }
        if let Some(b) = &self.bounds {
            for ((&lo, &hi), &xi) in b.lower.iter().zip(&b.upper).zip(x) {
                worst = worst.max(lo - xi).max(xi - hi);
            }
        }
        if worst == f64::NEG_INFINITY {
            0.0
        } else {
            worst
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Membership of an integer state in `nG`, i.e. `state / n` in `G`.
    pub fn contains_scaled(&self, state: &[i64], n: f64, tol: f64) -> bool {
        let mut worst = f64::NEG_INFINITY;
        for h in &self.halfspaces {
            let v: f64 = h
                .a
                .iter()
                .zip(state)
                .map(|(a, &s)| a * s as f64)
                .sum::<f64>()
                - h.c * n;
            worst = worst.max(v / n);
        }
        if let Some(b) = &self.bounds {
            for ((&lo, &hi), &s) in b.lower.iter().zip(&b.upper).zip(state) {
                let xi = s as f64 / n;
                worst = worst.max(lo - xi).max(xi - hi);
            }
        }
        worst <= tol
    }

    /// A finite bounding box used to place validation samples. Missing or
    /// infinite sides are replaced by `+-scale`.
    pub fn sampling_box(&self, dim: usize, scale: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![-scale; dim];
        let mut hi = vec![scale; dim];
        if let Some(b) = &self.bounds {
            for i in 0..dim {
                if b.lower[i].is_finite() {
                    lo[i] = b.lower[i];
                }
                if b.upper[i].is_finite() {
                    hi[i] = b.upper[i];
                }
            }
        }
        // tighten with half-spaces that bound a single coordinate from above
        // once the others sit at their lower bounds (covers simplices)
        for h in &self.halfspaces {
            for i in 0..dim {
                if h.a[i] <= 0.0 {
                    continue;
                }
                let others_nonneg = (0..dim).all(|j| j == i || (h.a[j] >= 0.0 && lo[j].is_finite()));
                if !others_nonneg {
                    continue;
                }
                let rest: f64 = (0..dim).filter(|&j| j != i).map(|j| h.a[j] * lo[j]).sum();
                let bound = (h.c - rest) / h.a[i];
                if bound < hi[i] {
                    hi[i] = bound;
                }
            }
        }
        for i in 0..dim {
            if hi[i] < lo[i] {
                hi[i] = lo[i];
            }
        }
        (lo, hi)
    }

    pub fn is_bounded_box(&self, dim: usize) -> bool {
        let (lo, hi) = self.sampling_box(dim, f64::INFINITY);
        lo.iter().chain(&hi).all(|v| v.is_finite())
    }

    pub fn has_dimension(&self, dim: usize) -> bool {
        self.halfspaces.iter().all(|h| h.a.len() == dim)
            && self
                .bounds
                .as_ref()
                .is_none_or(|b| b.lower.len() == dim && b.upper.len() == dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_membership() {
        let g = Domain::weighted_simplex(&[1.0, 1.0, 2.0]);
        assert!(g.contains(&[0.3, 0.2, 0.1], 0.0));
        assert!(!g.contains(&[0.3, 0.2, 0.3], 1e-12));
        assert!(!g.contains(&[-0.1, 0.2, 0.1], 1e-12));
        assert!(g.contains_scaled(&[3, 2, 1], 10.0, 0.0));
        assert!(!g.contains_scaled(&[3, 2, 3], 10.0, 1e-12));
    }

    #[test]
    fn sampling_box_of_simplex_and_half_line() {
        let g = Domain::weighted_simplex(&[1.0, 1.0, 2.0]);
        let (lo, hi) = g.sampling_box(3, 5.0);
        assert_eq!(lo, vec![0.0; 3]);
        assert_eq!(hi, vec![1.0, 1.0, 0.5]);

        let yule = Domain::interval(0.0, f64::INFINITY);
        let (lo, hi) = yule.sampling_box(1, 4.0);
        assert_eq!((lo[0], hi[0]), (0.0, 4.0));
        assert!(!yule.is_bounded_box(1));
        assert!(Domain::interval(0.0, 1.0).is_bounded_box(1));
    }
}
