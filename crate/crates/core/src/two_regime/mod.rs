//! Closed-form machinery for two-state models: the quartic characteristic
//! roots, the smooth-fit systems for the all-positive and mixed-sign drift
//! cases, and piecewise-analytic value functions.

mod liquidation;
mod negative;
mod piecewise;
mod positive;
mod quartic;

use serde::Serialize;

pub use liquidation::{
    liquidate_everywhere_candidate, liquidation_levels, CriticalLevel, LiquidateEverywhereValue,
    LiquidationDiagnostic,
};
pub use negative::{solve_negative, NegativeCaseSolution, CaseConstants};
pub use piecewise::{Branch, ExpTerm, Piecewise};
pub use positive::{cramer_coefficients, solve_barrier_pair, solve_positive, PositiveCaseSolution};
pub use quartic::{quartic_roots, Characteristic, QuarticRoots};

use crate::error::Result;
use crate::fixedpoint::{Grid, GridFunction};
use crate::policy::{BarrierPolicy, ValueFunction};

/// Bookkeeping from the multi-start Newton search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NewtonSummary {
    /// Iterations taken by the accepted start.
    pub iterations: usize,
    pub starts: usize,
    /// Distinct converged roots examined, the accepted one included.
    pub candidates: usize,
    /// Condition estimate of the inner 4×4 solve at the accepted root.
    pub condition_estimate: f64,
}

/// `n` deterministic perturbations of `anchor` by up to ±30% per coordinate.
pub(crate) fn jittered_starts<const N: usize>(anchor: &[f64; N], n: usize) -> Vec<[f64; N]> {
    (0..n)
        .map(|k| {
            std::array::from_fn(|j| {
                // Low-discrepancy offsets in (−1, 1), distinct per coordinate.
                let u = ((k + 1) as f64 * (0.618_033_988_75 + 0.414_213_562_37 * j as f64)).fract();
                anchor[j] * (1.0 + 0.3 * (2.0 * u - 1.0))
            })
        })
        .collect()
}

/// Drops roots that repeat an earlier one (same labeling, within 1e-7).
pub(crate) fn distinct_candidates<const N: usize>(
    found: Vec<(usize, [f64; N], usize)>,
) -> Vec<(usize, [f64; N], usize)> {
    let mut out: Vec<(usize, [f64; N], usize)> = Vec::new();
    for c in found {
        let dup = out.iter().any(|o| {
            o.0 == c.0 && o.1.iter().zip(&c.1).all(|(a, b)| (a - b).abs() <= 1e-7 * a.abs().max(1.0))
        });
        if !dup {
            out.push(c);
        }
    }
    out
}

/// Either closed-form solution, evaluable as a value function.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum TwoRegimeSolution {
    Positive(PositiveCaseSolution),
    Mixed(NegativeCaseSolution),
}

impl TwoRegimeSolution {
    pub fn evaluate(&self, x: f64, regime: usize) -> f64 {
        match self {
            Self::Positive(s) => s.evaluate(x, regime),
            Self::Mixed(s) => s.evaluate(x, regime),
        }
    }

    pub fn value_functions(&self) -> &[Piecewise; 2] {
        match self {
            Self::Positive(s) => &s.value,
            Self::Mixed(s) => &s.value,
        }
    }

    pub fn policy(&self) -> BarrierPolicy {
        match self {
            Self::Positive(s) => BarrierPolicy::new(s.barriers.to_vec()),
            Self::Mixed(s) => s.policy(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialises")
    }

    /// Samples both regimes on a uniform grid of step `h` covering [0, cap].
    pub fn to_grid(&self, h: f64, cap: f64) -> Result<GridFunction> {
        let v = self.value_functions();
        let grid = Grid::covering(h, cap)?;
        let policy = self.policy();
        GridFunction::from_fn(grid, &policy.barriers, |x, i| v[i].value(x))
    }
}

impl ValueFunction for TwoRegimeSolution {
    fn value(&self, x: f64, regime: usize) -> f64 {
        self.evaluate(x, regime)
    }
}

impl ValueFunction for PositiveCaseSolution {
    fn value(&self, x: f64, regime: usize) -> f64 {
        self.evaluate(x, regime)
    }
}

impl ValueFunction for NegativeCaseSolution {
    fn value(&self, x: f64, regime: usize) -> f64 {
        self.evaluate(x, regime)
    }
}

impl ValueFunction for [Piecewise; 2] {
    fn value(&self, x: f64, regime: usize) -> f64 {
        self[regime].value(x)
    }
}
