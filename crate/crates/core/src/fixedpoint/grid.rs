use std::io::Write;

use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::policy::ValueFunction;

/// Uniform grid 0, h, 2h, …, (len−1)h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub step: f64,
    pub len: usize,
}

impl Grid {
    /// Smallest grid with the given step reaching at least `cap`.
    pub fn covering(step: f64, cap: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidConfig(format!("grid step {step} must be positive")));
        }
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::InvalidConfig(format!("grid cap {cap} must be positive")));
        }
        let len = (cap / step - 1e-9).ceil() as usize + 1;
        if len > 50_000_000 {
            return Err(Error::InvalidConfig(format!(
                "grid of {len} points is too large"
            )));
        }
        Ok(Self {
            step,
            len: len.max(3),
        })
    }

    pub fn cap(&self) -> f64 {
        self.x(self.len - 1)
    }

    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// Index of the cell [x_k, x_{k+1}) containing x, clamped to the grid.
    pub fn cell(&self, x: f64) -> usize {
        ((x / self.step).floor().max(0.0) as usize).min(self.len - 2)
    }
}

/// Per-regime function sampled on a shared uniform grid, continued with
/// slope one beyond its regime's barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    samples: Vec<Vec<f64>>,
    barriers: Vec<f64>,
    barrier_values: Vec<f64>,
}

impl GridFunction {
    /// Samples `f` on nodes up to each barrier; nodes beyond are filled from
    /// the slope-one extension through (b_i, f(b_i, i)).
    pub fn from_fn<F: Fn(f64, usize) -> f64>(grid: Grid, barriers: &[f64], f: F) -> Result<Self> {
        for (i, &b) in barriers.iter().enumerate() {
            if !(b >= 0.0) || b > grid.cap() + 1e-12 {
                return Err(Error::BarrierOutOfRange {
                    regime: i,
                    barrier: b,
                    cap: grid.cap(),
                });
            }
        }
        let barrier_values: Vec<f64> = barriers.iter().enumerate().map(|(i, &b)| f(b, i)).collect();
        let samples = barriers
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                (0..grid.len)
                    .map(|k| {
                        let x = grid.x(k);
                        if x <= b {
                            f(x, i)
                        } else {
                            barrier_values[i] + x - b
                        }
                    })
                    .collect()
            })
            .collect();
        Self::from_parts(grid, samples, barriers.to_vec(), barrier_values)
    }

    pub fn from_parts(
        grid: Grid,
        samples: Vec<Vec<f64>>,
        barriers: Vec<f64>,
        barrier_values: Vec<f64>,
    ) -> Result<Self> {
        let n = samples.len();
        if n == 0 || barriers.len() != n || barrier_values.len() != n {
            return Err(Error::DimensionMismatch {
                what: "grid function regimes",
                expected: n,
                found: barriers.len(),
            });
        }
        for s in &samples {
            if s.len() != grid.len {
                return Err(Error::DimensionMismatch {
                    what: "grid samples",
                    expected: grid.len,
                    found: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite()) || barrier_values.iter().any(|v| !v.is_finite())
            {
                return Err(Error::Internal("non-finite grid sample".into()));
            }
        }
        Ok(Self {
            grid,
            samples,
            barriers,
            barrier_values,
        })
    }

    pub fn zero(grid: Grid, regimes: usize) -> Self {
        let cap = grid.cap();
        Self::from_fn(grid, &vec![cap; regimes], |_, _| 0.0).expect("zero function")
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn regimes(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }

    pub fn barrier(&self, i: usize) -> f64 {
        self.barriers[i]
    }

    pub fn barriers(&self) -> &[f64] {
        &self.barriers
    }

    pub fn eval(&self, x: f64, i: usize) -> f64 {
        let b = self.barriers[i];
        if x >= b {
            return self.barrier_values[i] + x - b;
        }
        let s = &self.samples[i];
        let k = self.grid.cell(x);
        let x0 = self.grid.x(k);
        let (x1, v1) = if self.grid.x(k + 1) > b {
            (b, self.barrier_values[i])
        } else {
            (self.grid.x(k + 1), s[k + 1])
        };
        if x1 <= x0 {
            return s[k];
        }
        s[k] + (v1 - s[k]) * (x - x0) / (x1 - x0)
    }

    /// Derivative at node k by central differences (second-order one-sided
    /// at the ends); exactly one beyond the barrier.
    pub fn node_derivative(&self, i: usize, k: usize) -> f64 {
        let x = self.grid.x(k);
        if x > self.barriers[i] {
            return 1.0;
        }
        let s = &self.samples[i];
        let h = self.grid.step;
        let n = self.grid.len;
        if k == 0 {
            (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * h)
        } else if k == n - 1 {
            (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / (2.0 * h)
        } else {
            (s[k + 1] - s[k - 1]) / (2.0 * h)
        }
    }

    /// Largest second difference v_{k+1} − 2v_k + v_{k−1} and where it occurs.
    pub fn max_second_difference(&self, i: usize) -> (f64, f64) {
        let s = &self.samples[i];
        let mut worst = (f64::NEG_INFINITY, 0.0);
        for k in 1..s.len() - 1 {
            let d = s[k + 1] - 2.0 * s[k] + s[k - 1];
            if d > worst.0 {
                worst = (d, self.grid.x(k));
            }
        }
        worst
    }

    /// max_i sup_x |f_i − g_i| / (1 + x) over the grid.
    pub fn weighted_distance(&self, other: &Self) -> f64 {
        self.distance_by(other, |x| 1.0 / (1.0 + x))
    }

    /// max_i sup_x |f_i − g_i| over the grid (the tail beyond the cap is
    /// constant once both functions are linear).
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.distance_by(other, |_| 1.0)
    }

    fn distance_by<W: Fn(f64) -> f64>(&self, other: &Self, w: W) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.regimes() {
            for k in 0..self.grid.len {
                let x = self.grid.x(k);
                d = d.max((self.samples[i][k] - other.eval(x, i)).abs() * w(x));
            }
        }
        d
    }

    /// Pointwise average with matching grids; the barrier is averaged too.
    pub fn midpoint(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.regimes() != other.regimes() {
            return Err(Error::DimensionMismatch {
                what: "midpoint operands",
                expected: self.grid.len,
                found: other.grid.len,
            });
        }
        let barriers: Vec<f64> = self
            .barriers
            .iter()
            .zip(&other.barriers)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let f = |x: f64, i: usize| 0.5 * (self.eval(x, i) + other.eval(x, i));
        Self::from_fn(self.grid, &barriers, f)
    }

    /// CSV with columns `regime,x,value,derivative`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "regime,x,value,derivative")?;
        for i in 0..self.regimes() {
            for k in 0..self.grid.len {
                writeln!(
                    w,
                    "{},{},{},{}",
                    i,
                    fmt_sig(self.grid.x(k)),
                    fmt_sig(self.samples[i][k]),
                    fmt_sig(self.node_derivative(i, k))
                )?;
            }
        }
        Ok(())
    }
}

impl ValueFunction for GridFunction {
    fn value(&self, x: f64, regime: usize) -> f64 {
        self.eval(x, regime)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_extends() {
        let grid = Grid::covering(0.1, 1.0).unwrap();
        let f = GridFunction::from_fn(grid, &[0.55], |x, _| x * (2.0 - x)).unwrap();
        assert!((f.eval(0.2, 0) - 0.36).abs() < 1e-12);
        let vb = 0.55 * 1.45;
        assert!((f.eval(0.9, 0) - (vb + 0.35)).abs() < 1e-12);
        // Partial last cell interpolates towards the exact barrier value.
        let mid = 0.525;
        let expect = 0.75 + (vb - 0.75) * (mid - 0.5) / 0.05;
        assert!((f.eval(mid, 0) - expect).abs() < 1e-12);
    }
}
