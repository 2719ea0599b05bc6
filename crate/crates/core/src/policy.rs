//! Barrier and liquidation-dividend policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-regime dividend barriers b_i with optional liquidation levels d_i.
/// An empty `liquidation` list means d ≡ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierPolicy {
    pub barriers: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub liquidation: Vec<f64>,
}

impl BarrierPolicy {
    pub fn new(barriers: Vec<f64>) -> Self {
        Self {
            barriers,
            liquidation: Vec::new(),
        }
    }

    pub fn with_liquidation(barriers: Vec<f64>, liquidation: Vec<f64>) -> Self {
        Self {
            barriers,
            liquidation,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.check_shape()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.barriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.barriers.is_empty()
    }

    pub fn barrier(&self, i: usize) -> f64 {
        self.barriers[i]
    }

    pub fn liquidation_level(&self, i: usize) -> f64 {
        self.liquidation.get(i).copied().unwrap_or(0.0)
    }

    pub fn has_liquidation(&self) -> bool {
        self.liquidation.iter().any(|&d| d > 0.0)
    }

    /// Shape and sign checks independent of any model.
    pub fn check_shape(&self) -> Result<()> {
        if !self.liquidation.is_empty() && self.liquidation.len() != self.barriers.len() {
            return Err(Error::DimensionMismatch {
                what: "liquidation levels",
                expected: self.barriers.len(),
                found: self.liquidation.len(),
            });
        }
        for (i, &b) in self.barriers.iter().enumerate() {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::OutOfRange {
                    what: "barrier",
                    value: b,
                });
            }
            let d = self.liquidation_level(i);
            if !d.is_finite() || d < 0.0 {
                return Err(Error::OutOfRange {
                    what: "liquidation level",
                    value: d,
                });
            }
            if d > 0.0 && d >= b {
                return Err(Error::InvalidBand { regime: i, d, b });
            }
        }
        Ok(())
    }

    /// Checks against a model with `n` states.
    pub fn check_for(&self, n: usize) -> Result<()> {
        if self.barriers.len() != n {
            return Err(Error::DimensionMismatch {
                what: "policy barriers",
                expected: n,
                found: self.barriers.len(),
            });
        }
        self.check_shape()
    }

    /// All barriers shifted by `delta` (clamped at zero, liquidation kept below).
    pub fn shifted(&self, delta: f64) -> Self {
        let barriers: Vec<f64> = self.barriers.iter().map(|b| (b + delta).max(0.0)).collect();
        let liquidation = self
            .liquidation
            .iter()
            .zip(&barriers)
            .map(|(&d, &b)| if d >= b { 0.0 } else { d })
            .collect();
        Self {
            barriers,
            liquidation,
        }
    }
}

/// Anything that can be evaluated as a per-regime value function.
pub trait ValueFunction {
    fn value(&self, x: f64, regime: usize) -> f64;
}

/// Parses a comma- or whitespace-separated list of non-negative reserve levels.
pub fn parse_probe_points(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
    {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::Parse(format!("invalid probe point `{tok}`")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::OutOfRange {
                what: "probe point",
                value: v,
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse("no probe points given".into()));
    }
    Ok(out)
}
