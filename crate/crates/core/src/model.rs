//! Regime-switching market model: per-state drift, volatility and discount
//! rate plus the generator of the modulating Markov chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on generator row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub mu: f64,
    pub sigma: f64,
    pub discount: f64,
}

impl RegimeParams {
    pub fn new(mu: f64, sigma: f64, discount: f64) -> Self {
        Self {
            mu,
            sigma,
            discount,
        }
    }
}

/// Unvalidated model description, the shape of the JSON model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub states: Vec<RegimeParams>,
    pub generator: Vec<Vec<f64>>,
}

/// Validated model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel {
    states: Vec<RegimeParams>,
    generator: Vec<Vec<f64>>,
}

/// θ_i = r_i − q_ii: discount plus the intensity of leaving state i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveRate {
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftCase {
    AllPositive,
    MixedSign,
    AllNonPositive,
}

pub fn validate(raw: &RawModel) -> Result<RegimeModel> {
    let n = raw.states.len();
    if n == 0 {
        return Err(Error::EmptyModel);
    }
    if raw.generator.len() != n {
        return Err(Error::DimensionMismatch {
            what: "generator rows",
            expected: n,
            found: raw.generator.len(),
        });
    }
    for row in &raw.generator {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                what: "generator columns",
                expected: n,
                found: row.len(),
            });
        }
    }
    for (i, s) in raw.states.iter().enumerate() {
        for (field, v) in [("mu", s.mu), ("sigma", s.sigma), ("discount", s.discount)] {
            if !v.is_finite() {
                return Err(Error::NonFiniteParameter { state: i, field });
            }
        }
        if s.sigma <= 0.0 {
            return Err(Error::NonPositiveVolatility {
                state: i,
                value: s.sigma,
            });
        }
        if s.discount <= 0.0 {
            return Err(Error::NonPositiveDiscount {
                state: i,
                value: s.discount,
            });
        }
    }
    let mut generator = raw.generator.clone();
    for (i, row) in generator.iter_mut().enumerate() {
        let mut off = 0.0;
        for (j, &q) in row.iter().enumerate() {
            if !q.is_finite() {
                return Err(Error::NonFiniteParameter {
                    state: i,
                    field: "generator",
                });
            }
            if j != i {
                if q < 0.0 {
                    return Err(Error::NegativeOffDiagonal {
                        row: i,
                        col: j,
                        value: q,
                    });
                }
                off += q;
            }
        }
        let sum = off + row[i];
        if sum.abs() > ROW_SUM_TOL {
            return Err(Error::BadGeneratorRowSum { row: i, sum });
        }
        row[i] = -off;
    }
    Ok(RegimeModel {
        states: raw.states.clone(),
        generator,
    })
}

impl RegimeModel {
    pub fn new(states: Vec<RegimeParams>, generator: Vec<Vec<f64>>) -> Result<Self> {
        validate(&RawModel { states, generator })
    }

    /// One state, no switching.
    pub fn single(mu: f64, sigma: f64, discount: f64) -> Result<Self> {
        Self::new(vec![RegimeParams::new(mu, sigma, discount)], vec![vec![0.0]])
    }

    /// Two states with exit rates `q01` (0→1) and `q10` (1→0).
    pub fn two_state(s0: RegimeParams, s1: RegimeParams, q01: f64, q10: f64) -> Result<Self> {
        Self::new(vec![s0, s1], vec![vec![-q01, q01], vec![q10, -q10]])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text)?;
        validate(&raw)
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            states: self.states.clone(),
            generator: self.generator.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("model serialises")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[RegimeParams] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &RegimeParams {
        &self.states[i]
    }

    pub fn generator(&self) -> &[Vec<f64>] {
        &self.generator
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.generator[i][j]
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.states[i].discount - self.generator[i][i]
    }

    pub fn effective_rates(&self) -> Vec<EffectiveRate> {
        (0..self.len())
            .map(|i| EffectiveRate {
                theta: self.theta(i),
            })
            .collect()
    }

    pub fn drift_sign_case(&self) -> DriftCase {
        let pos = self.states.iter().filter(|s| s.mu > 0.0).count();
        if pos == self.len() {
            DriftCase::AllPositive
        } else if pos == 0 {
            DriftCase::AllNonPositive
        } else {
            DriftCase::MixedSign
        }
    }

    /// C = max_i Σ_{j≠i} q_ij / θ_i, the contraction factor of T_b.
    pub fn contraction_factor(&self) -> f64 {
        (0..self.len())
            .map(|i| -self.generator[i][i] / self.theta(i))
            .fold(0.0, f64::max)
    }

    /// Model with states reordered so that new state k is old state `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                what: "permutation",
                expected: n,
                found: perm.len(),
            });
        }
        let states = perm.iter().map(|&p| self.states[p]).collect();
        let generator = perm
            .iter()
            .map(|&p| perm.iter().map(|&q| self.generator[p][q]).collect())
            .collect();
        Self::new(states, generator)
    }
}

impl Serialize for RegimeModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegimeModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawModel::deserialize(d)?;
        validate(&raw).map_err(serde::de::Error::custom)
    }
}

/// The two-state parameter set used for the comparative statics:
/// (μ, σ, r) = (0.06, 0.24, 0.04) and (0.08, 0.30, 0.05), q01 = 2, q10 = 3.
pub fn reference_model() -> RegimeModel {
    RegimeModel::two_state(
        RegimeParams::new(0.06, 0.24, 0.04),
        RegimeParams::new(0.08, 0.30, 0.05),
        2.0,
        3.0,
    )
    .expect("reference model is valid")
}
