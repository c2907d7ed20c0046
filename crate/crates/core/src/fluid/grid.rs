use super::FluidError;

/// Uniform time grid `0 = t_0 < ... < t_M = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    t_end: f64,
    steps: usize,
}

impl Grid {
    /// `h` must divide `t_end` up to a relative error of `1e-9`.
    pub fn with_step(t_end: f64, h: f64) -> Result<Self, FluidError> {
        let bad = FluidError::BadStep { h, t_end };
        if !(t_end > 0.0 && t_end.is_finite() && h > 0.0 && h <= t_end) {
            return Err(bad);
        }
        let ratio = t_end / h;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps > u32::MAX as f64 {
            return Err(bad);
        }
        Ok(Self {
            t_end,
            steps: steps as usize,
        })
    }

    pub fn with_steps(t_end: f64, steps: usize) -> Result<Self, FluidError> {
        if !(t_end > 0.0 && t_end.is_finite()) || steps == 0 {
            return Err(FluidError::BadStep {
                h: t_end / steps as f64,
                t_end,
            });
        }
        Ok(Self { t_end, steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.h()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Cell index `k` and weight `w` in `[0, 1)` with `t = (1-w) t_k + w t_{k+1}`.
    /// Times outside `[0, T]` are clamped.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        if !(t > 0.0) {
            return (0, 0.0);
        }
        if t >= self.t_end {
            return (self.steps, 0.0);
        }
        let s = t / self.h();
        let k = (s.floor() as usize).min(self.steps - 1);
        let w = (s - k as f64).clamp(0.0, 1.0);
        if w >= 1.0 {
            (k + 1, 0.0)
        } else {
            (k, w)
        }
    }

    /// Index of the cell `[t_k, t_{k+1})` containing `t`, clamped to the last cell.
    pub fn cell(&self, t: f64) -> usize {
        let (k, _) = self.locate(t);
        k.min(self.steps - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_must_divide() {
        assert!(Grid::with_step(1.0, 1e-3).is_ok());
        assert_eq!(Grid::with_step(1.0, 1e-3).unwrap().len(), 1001);
        assert!(Grid::with_step(1.0, 0.3).is_err());
        assert!(Grid::with_step(0.0, 0.1).is_err());
        assert!(Grid::with_step(1.0, f64::NAN).is_err());
    }

    #[test]
    fn locate_interpolates() {
        let g = Grid::with_step(2.0, 0.5).unwrap();
        assert_eq!(g.locate(0.75), (1, 0.5));
        assert_eq!(g.locate(2.0), (4, 0.0));
        assert_eq!(g.locate(-1.0), (0, 0.0));
        assert_eq!(g.cell(2.0), 3);
        assert_eq!(g.time(4), 2.0);
    }
}
