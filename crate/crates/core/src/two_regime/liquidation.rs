//! Critical levels Δ_i below which carrying on in regime i is locally
//! unprofitable, and the "liquidate at every level" candidate.

use serde::{Serialize, Serializer};

use super::piecewise::{Branch, ExpTerm, Piecewise};
use crate::analytics::characteristic_roots;
use crate::error::{Error, Result};
use crate::model::RegimeModel;
use crate::numeric::{bisect, solve_linear};
use crate::policy::ValueFunction;

const SCAN_POINTS: usize = 4000;

/// A reserve level or the +∞ marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalLevel {
    Finite(f64),
    Infinite,
}

impl CriticalLevel {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Self::Finite(x) => Some(*x),
            Self::Infinite => None,
        }
    }
}

impl Serialize for CriticalLevel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(x) => s.serialize_f64(crate::format::round_sig(*x)),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiquidationDiagnostic {
    pub delta: Vec<CriticalLevel>,
}

/// Y_i(x) = μ_i − c_i x + Σ_{j≠i} q_ij (V_j(x) − x).
fn y_function(model: &RegimeModel, v: &dyn ValueFunction, i: usize, x: f64) -> f64 {
    let s = model.state(i);
    let mut y = s.mu - s.discount * x;
    for j in (0..model.len()).filter(|&j| j != i) {
        y += model.rate(i, j) * (v.value(x, j) - x);
    }
    y
}

/// Δ_i = inf{x ≥ 0 : Y_i(x) > 0}, by a grid scan of [0, x_cap] and bisection.
pub fn liquidation_levels(
    model: &RegimeModel,
    v: &dyn ValueFunction,
    x_cap: f64,
) -> LiquidationDiagnostic {
    let delta = (0..model.len())
        .map(|i| {
            let y = |x: f64| y_function(model, v, i, x);
            if y(0.0) > 0.0 {
                return CriticalLevel::Finite(0.0);
            }
            let step = x_cap / SCAN_POINTS as f64;
            let mut prev = 0.0;
            for k in 1..=SCAN_POINTS {
                let x = k as f64 * step;
                if y(x) > 0.0 {
                    // Y ≤ 0 at prev, > 0 at x; bisect on a strictly signed function.
                    let root = bisect(
                        |z| if y(z) > 0.0 { 1.0 } else { -1.0 },
                        prev,
                        x,
                        1e-12,
                    )
                    .unwrap_or(x);
                    return CriticalLevel::Finite(root);
                }
                prev = x;
            }
            CriticalLevel::Infinite
        })
        .collect();
    LiquidationDiagnostic { delta }
}

/// Value of liquidating immediately in regime `neg` at every level, with an
/// optimal barrier in the other regime: V_neg(x) = x and
/// V_pos = K₁e^{λ₁x} + K₂e^{λ₂x} + β(x + μ/θ) below the barrier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiquidateEverywhereValue {
    pub liquidating_regime: usize,
    pub barrier: f64,
    pub value: [Piecewise; 2],
}

impl ValueFunction for LiquidateEverywhereValue {
    fn value(&self, x: f64, regime: usize) -> f64 {
        self.value[regime].value(x)
    }
}

pub fn liquidate_everywhere_candidate(
    model: &RegimeModel,
    neg: usize,
) -> Result<LiquidateEverywhereValue> {
    if model.len() != 2 {
        return Err(Error::WrongStateCount { found: model.len() });
    }
    let pos = 1 - neg;
    let s = model.state(pos);
    let theta = model.theta(pos);
    let roots = characteristic_roots(s.mu, s.sigma, theta)?;
    let (l1, l2) = (roots.lambda_minus, roots.lambda_plus);
    let beta = model.rate(pos, neg) / theta;
    let shift = s.mu / theta;

    // K₁ e^{λ₁x} + K₂ e^{λ₂(x−b)}: V(0)=0 and V′(b)=1 are linear in K and
    // regular for every b; the barrier is then the zero of V″(b).
    let coeffs = |b: f64| -> Result<[f64; 2]> {
        let a = [[1.0, (-l2 * b).exp()], [l1 * (l1 * b).exp(), l2]];
        Ok(solve_linear(a, [-beta * shift, 1.0 - beta])?.x)
    };
    let curvature = |b: f64| -> f64 {
        match coeffs(b) {
            Ok(k) => k[0] * l1 * l1 * (l1 * b).exp() + k[1] * l2 * l2,
            Err(_) => f64::NAN,
        }
    };
    let mut hi = 1e-6;
    let mut bracket = None;
    while hi < 1e3 {
        let next = hi * 1.25 + 1e-3;
        if curvature(hi).signum() != curvature(next).signum() {
            bracket = Some((hi, next));
            break;
        }
        hi = next;
    }
    let (a, b) = bracket.ok_or_else(|| {
        Error::RootIsolationFailure("no barrier for the liquidate-everywhere candidate".into())
    })?;
    let barrier = bisect(curvature, a, b, 1e-14)?;
    let k = coeffs(barrier)?;
    let below = Branch {
        lo: 0.0,
        hi: Some(barrier),
        terms: vec![ExpTerm::new(k[0], l1, 0.0), ExpTerm::new(k[1], l2, barrier)],
        slope: beta,
        intercept: beta * shift,
    };
    let vb = below.value(barrier);
    let mut value = [
        Piecewise::new(vec![Branch::linear(0.0, None, 1.0, 0.0)]),
        Piecewise::new(vec![below, Branch::linear(barrier, None, 1.0, vb - barrier)]),
    ];
    if neg == 1 {
        value.swap(0, 1);
    }
    Ok(LiquidateEverywhereValue {
        liquidating_regime: neg,
        barrier,
        value,
    })
}
