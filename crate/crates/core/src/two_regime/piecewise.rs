use serde::Serialize;

use crate::format::{sig9, sig9_opt};

/// c·e^{λ(x − x_ref)}
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpTerm {
    #[serde(with = "sig9")]
    pub coeff: f64,
    #[serde(with = "sig9")]
    pub exponent: f64,
    #[serde(with = "sig9")]
    pub x_ref: f64,
}

impl ExpTerm {
    pub fn new(coeff: f64, exponent: f64, x_ref: f64) -> Self {
        Self {
            coeff,
            exponent,
            x_ref,
        }
    }

    /// Coefficient of e^{λx} without the reference shift.
    pub fn absolute_coeff(&self) -> f64 {
        self.coeff * (-self.exponent * self.x_ref).exp()
    }

    fn derivative(&self, x: f64, order: i32) -> f64 {
        self.coeff * self.exponent.powi(order) * (self.exponent * (x - self.x_ref)).exp()
    }
}

/// Σ terms + slope·x + intercept on [lo, hi); `hi = None` means +∞.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    #[serde(with = "sig9")]
    pub lo: f64,
    #[serde(with = "sig9_opt")]
    pub hi: Option<f64>,
    pub terms: Vec<ExpTerm>,
    #[serde(with = "sig9")]
    pub slope: f64,
    #[serde(with = "sig9")]
    pub intercept: f64,
}

impl Branch {
    pub fn exponential(lo: f64, hi: f64, terms: Vec<ExpTerm>) -> Self {
        Self {
            lo,
            hi: Some(hi),
            terms,
            slope: 0.0,
            intercept: 0.0,
        }
    }

    pub fn linear(lo: f64, hi: Option<f64>, slope: f64, intercept: f64) -> Self {
        Self {
            lo,
            hi,
            terms: Vec::new(),
            slope,
            intercept,
        }
    }

    /// Derivative of the given order (0 = value).
    pub fn derivative(&self, x: f64, order: i32) -> f64 {
        let mut s: f64 = self.terms.iter().map(|t| t.derivative(x, order)).sum();
        match order {
            0 => s += self.slope * x + self.intercept,
            1 => s += self.slope,
            _ => {}
        }
        s
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }
}

/// A per-regime value function made of consecutive branches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Piecewise {
    pub branches: Vec<Branch>,
}

impl Piecewise {
    pub fn new(branches: Vec<Branch>) -> Self {
        Self { branches }
    }

    fn branch(&self, x: f64) -> &Branch {
        self.branches
            .iter()
            .find(|b| b.hi.is_none_or(|hi| x < hi))
            .unwrap_or_else(|| self.branches.last().expect("non-empty"))
    }

    pub fn derivative(&self, x: f64, order: i32) -> f64 {
        self.branch(x).derivative(x, order)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// Interior breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.branches.iter().filter_map(|b| b.hi).collect()
    }

    /// Largest jump of derivatives 0..=max_order across breakpoints.
    pub fn continuity_defect(&self, max_order: i32) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.branches.windows(2) {
            let x = w[0].hi.expect("interior branch is bounded");
            for k in 0..=max_order {
                worst = worst.max((w[0].derivative(x, k) - w[1].derivative(x, k)).abs());
            }
        }
        worst
    }
}
