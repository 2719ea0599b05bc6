//! Single-regime closed forms: characteristic roots, the q-scale function of
//! Brownian motion with drift, the classical barrier a* and its value V*,
//! the killed/reflected resolvent density and the a-priori bounds V±.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::RegimeModel;

/// Roots of ½σ²λ² + μλ − q = 0, sorted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPair {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

pub fn characteristic_roots(mu: f64, sigma: f64, q: f64) -> Result<RootPair> {
    if !(sigma > 0.0) {
        return Err(Error::DegenerateVolatility { sigma });
    }
    if !(q >= 0.0) {
        return Err(Error::OutOfRange {
            what: "killing rate q",
            value: q,
        });
    }
    let s2 = sigma * sigma;
    let a = mu / s2;
    let c = 2.0 * q / s2;
    let disc = (a * a + c).sqrt();
    // Compute the root without cancellation first, the other from λ₊λ₋ = −c.
    let (lm, lp) = if a >= 0.0 {
        let lm = -a - disc;
        let lp = if lm != 0.0 { -c / lm } else { 0.0 };
        (lm, lp)
    } else {
        let lp = -a + disc;
        let lm = if lp != 0.0 { -c / lp } else { 0.0 };
        (lm, lp)
    };
    Ok(RootPair {
        lambda_minus: lm.min(lp),
        lambda_plus: lm.max(lp),
    })
}

/// W^(q) for Brownian motion with drift μ and volatility σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleFunction {
    pub mu: f64,
    pub sigma: f64,
    pub q: f64,
    pub roots: RootPair,
}

impl ScaleFunction {
    pub fn new(mu: f64, sigma: f64, q: f64) -> Result<Self> {
        let roots = characteristic_roots(mu, sigma, q)?;
        Ok(Self {
            mu,
            sigma,
            q,
            roots,
        })
    }

    fn scale(&self) -> f64 {
        2.0 / (self.sigma * self.sigma)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (m, p) = (self.roots.lambda_minus, self.roots.lambda_plus);
        let d = p - m;
        let ratio = if d == 0.0 {
            x
        } else {
            (d * x).exp_m1() / d
        };
        self.scale() * (m * x).exp() * ratio
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.derivative_of_order(x, 1)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.derivative_of_order(x, 2)
    }

    /// Termwise derivative of order `k` ≥ 1.
    pub fn derivative_of_order(&self, x: f64, k: i32) -> f64 {
        let (m, p) = (self.roots.lambda_minus, self.roots.lambda_plus);
        let d = p - m;
        if d == 0.0 {
            // Double root λ: W = s·x·e^{λx}.
            let kf = k as f64;
            return self.scale()
                * (kf * m.powi(k - 1) + m.powi(k) * x)
                * (m * x).exp();
        }
        self.scale() * (p.powi(k) * (p * x).exp() - m.powi(k) * (m * x).exp()) / d
    }

    /// Z^(q)(x) = 1 + q ∫₀ˣ W^(q)(y) dy.
    pub fn z_value(&self, x: f64) -> f64 {
        let (m, p) = (self.roots.lambda_minus, self.roots.lambda_plus);
        let d = p - m;
        if d == 0.0 || self.q == 0.0 {
            return 1.0;
        }
        let ip = if p == 0.0 { x } else { (p * x).exp_m1() / p };
        let im = if m == 0.0 { x } else { (m * x).exp_m1() / m };
        1.0 + self.q * self.scale() * (ip - im) / d
    }
}

pub fn scale_function(mu: f64, sigma: f64, q: f64, x: f64) -> Result<[f64; 3]> {
    let w = ScaleFunction::new(mu, sigma, q)?;
    Ok([w.value(x), w.derivative(x), w.second_derivative(x)])
}

/// Closed-form optimal barrier of the single-regime problem.
pub fn single_regime_barrier(mu: f64, sigma: f64, r: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::DegenerateVolatility { sigma });
    }
    if !(mu > 0.0) {
        return Err(Error::NonPositiveDrift { mu });
    }
    if !(r > 0.0) {
        return Err(Error::OutOfRange {
            what: "discount rate",
            value: r,
        });
    }
    let s2 = sigma * sigma;
    let s = (mu * mu + 2.0 * r * s2).sqrt();
    // s − μ = 2rσ²/(s + μ) avoids cancellation for large drifts.
    let closed = s2 / s * ((s + mu) * (s + mu) / (2.0 * r * s2)).ln();

    let bisected = second_derivative_zero(&ScaleFunction::new(mu, sigma, r)?)?;
    if (closed - bisected).abs() > 1e-8 * closed.max(1.0) {
        return Err(Error::Internal(format!(
            "barrier formula {closed} disagrees with W'' root {bisected}"
        )));
    }
    Ok(closed)
}

/// Zero of W″ by bisection on the rescaled sign function p²e^{(p−m)x} − m².
fn second_derivative_zero(w: &ScaleFunction) -> Result<f64> {
    let (m, p) = (w.roots.lambda_minus, w.roots.lambda_plus);
    let d = p - m;
    let g = |x: f64| p * p * (d * x).exp() - m * m;
    if g(0.0) >= 0.0 {
        return Err(Error::Internal("W'' is non-negative at 0".into()));
    }
    let mut hi = 1.0 / d.max(1e-300);
    let mut guard = 0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::Internal("no sign change of W''".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Value of the classical barrier strategy at a* for one regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleRegimeSolution {
    pub mu: f64,
    pub sigma: f64,
    pub discount: f64,
    pub barrier: f64,
    pub scale: ScaleFunction,
    slope_at_barrier: f64,
}

impl SingleRegimeSolution {
    pub fn new(mu: f64, sigma: f64, discount: f64) -> Result<Self> {
        let barrier = single_regime_barrier(mu, sigma, discount)?;
        let scale = ScaleFunction::new(mu, sigma, discount)?;
        Ok(Self {
            mu,
            sigma,
            discount,
            barrier,
            scale,
            slope_at_barrier: scale.derivative(barrier),
        })
    }

    pub fn roots(&self) -> RootPair {
        self.scale.roots
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= self.barrier {
            self.scale.value(x) / self.slope_at_barrier
        } else {
            x - self.barrier + self.mu / self.discount
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x <= self.barrier {
            self.scale.derivative(x) / self.slope_at_barrier
        } else {
            1.0
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        if x <= self.barrier {
            self.scale.second_derivative(x) / self.slope_at_barrier
        } else {
            0.0
        }
    }
}

pub fn single_regime_value(mu: f64, sigma: f64, r: f64, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::OutOfRange {
            what: "reserve level",
            value: x,
        });
    }
    Ok(SingleRegimeSolution::new(mu, sigma, r)?.value(x))
}

/// Occupation density of the diffusion started at x, reflected at b, killed
/// at 0 and at rate q.
pub fn resolvent_density(mu: f64, sigma: f64, q: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::OutOfRange {
            what: "killing rate q",
            value: q,
        });
    }
    for (what, v) in [("x", x), ("y", y)] {
        if !(0.0..=b).contains(&v) {
            return Err(Error::OutOfRange { what, value: v });
        }
    }
    let w = ScaleFunction::new(mu, sigma, q)?;
    let mut h = w.value(x) * w.derivative(b - y) / w.derivative(b);
    if x >= y {
        h -= w.value(x - y);
    }
    Ok(h)
}

/// Unit-volatility single-regime solutions bracketing the value function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPair {
    pub lower: SingleRegimeSolution,
    pub upper: SingleRegimeSolution,
}

pub fn apriori_bounds(model: &RegimeModel) -> Result<BoundPair> {
    for (i, s) in model.states().iter().enumerate() {
        if !(s.mu > 0.0) {
            return Err(Error::DriftHypothesisViolated { state: i, mu: s.mu });
        }
    }
    let ratios = |f: fn(&crate::model::RegimeParams) -> f64| -> Vec<f64> {
        model
            .states()
            .iter()
            .map(|s| f(s) / (s.sigma * s.sigma))
            .collect()
    };
    let drift = ratios(|s| s.mu);
    let disc = ratios(|s| s.discount);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BoundPair {
        lower: SingleRegimeSolution::new(min(&drift), 1.0, max(&disc))?,
        upper: SingleRegimeSolution::new(max(&drift), 1.0, min(&disc))?,
    })
}
