use serde::Serialize;

use crate::analytics::{characteristic_roots, RootPair};
use crate::error::{Error, Result};
use crate::format::sig9_vec;
use crate::model::RegimeModel;

/// F_k(λ) = ½σ_k²λ² + μ_kλ + q_kk − c_k for both regimes of a two-state model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristic {
    half_var: [f64; 2],
    mu: [f64; 2],
    shift: [f64; 2],
    q_diag: [f64; 2],
}

impl Characteristic {
    pub fn new(model: &RegimeModel) -> Result<Self> {
        if model.len() != 2 {
            return Err(Error::WrongStateCount { found: model.len() });
        }
        let s = model.states();
        Ok(Self {
            half_var: [0.5 * s[0].sigma.powi(2), 0.5 * s[1].sigma.powi(2)],
            mu: [s[0].mu, s[1].mu],
            shift: [model.rate(0, 0) - s[0].discount, model.rate(1, 1) - s[1].discount],
            q_diag: [model.rate(0, 0), model.rate(1, 1)],
        })
    }

    pub fn f(&self, k: usize, lam: f64) -> f64 {
        (self.half_var[k] * lam + self.mu[k]) * lam + self.shift[k]
    }

    /// F₀F₁ − q₀₀q₁₁.
    pub fn quartic(&self, lam: f64) -> f64 {
        self.f(0, lam) * self.f(1, lam) - self.q_diag[0] * self.q_diag[1]
    }

    /// Monomial coefficients of the quartic, highest degree first.
    pub fn coefficients(&self) -> [f64; 5] {
        let (a0, b0, c0) = (self.half_var[0], self.mu[0], self.shift[0]);
        let (a1, b1, c1) = (self.half_var[1], self.mu[1], self.shift[1]);
        [
            a0 * a1,
            a0 * b1 + b0 * a1,
            a0 * c1 + b0 * b1 + c0 * a1,
            b0 * c1 + c0 * b1,
            c0 * c1 - self.q_diag[0] * self.q_diag[1],
        ]
    }
}

/// The four real roots of F₀F₁ = q₀₀q₁₁ plus the per-regime quadratic roots
/// λ^k of F_k = 0 that interlace with them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarticRoots {
    #[serde(with = "sig9_vec")]
    pub lambda: [f64; 4],
    #[serde(skip)]
    pub single: [RootPair; 2],
}

impl QuarticRoots {
    /// λ₁ < min(λ₁⁰,λ₁¹) ≤ max(λ₁⁰,λ₁¹) < λ₂ < 0 < λ₃ < min(λ₂⁰,λ₂¹) ≤ max(…) < λ₄.
    pub fn interlacing_holds(&self) -> bool {
        let [l1, l2, l3, l4] = self.lambda;
        let n = [self.single[0].lambda_minus, self.single[1].lambda_minus];
        let p = [self.single[0].lambda_plus, self.single[1].lambda_plus];
        l1 < n[0].min(n[1])
            && n[0].max(n[1]) < l2
            && l2 < 0.0
            && 0.0 < l3
            && l3 < p[0].min(p[1])
            && p[0].max(p[1]) < l4
    }
}

pub fn quartic_roots(model: &RegimeModel) -> Result<QuarticRoots> {
    let ch = Characteristic::new(model)?;
    let roots = |k: usize| {
        characteristic_roots(model.state(k).mu, model.state(k).sigma, model.theta(k))
    };
    let single = [roots(0)?, roots(1)?];
    let neg = [single[0].lambda_minus, single[1].lambda_minus];
    let pos = [single[0].lambda_plus, single[1].lambda_plus];
    let (nlo, nhi) = (neg[0].min(neg[1]), neg[0].max(neg[1]));
    let (plo, phi) = (pos[0].min(pos[1]), pos[0].max(pos[1]));

    // Outer brackets: walk outwards until the quartic turns positive.
    let outward = |from: f64, dir: f64| -> Result<f64> {
        let mut step = from.abs().max(1.0);
        for _ in 0..200 {
            let x = from + dir * step;
            if ch.quartic(x) > 0.0 {
                return Ok(x);
            }
            step *= 2.0;
        }
        Err(Error::RootIsolationFailure("outer bracket not found".into()))
    };
    let left = outward(nlo, -1.0)?;
    let right = outward(phi, 1.0)?;
    let brackets = [(left, nlo), (nhi, 0.0), (0.0, plo), (phi, right)];
    let mut lambda = [0.0; 4];
    for (k, &(a, b)) in brackets.iter().enumerate() {
        let (fa, fb) = (ch.quartic(a), ch.quartic(b));
        if !(fa * fb < 0.0) {
            return Err(Error::RootIsolationFailure(format!(
                "no sign change on [{a}, {b}] (values {fa}, {fb})"
            )));
        }
        lambda[k] = crate::numeric::bisect(|x| ch.quartic(x), a, b, 0.0)?;
    }
    Ok(QuarticRoots { lambda, single })
}
