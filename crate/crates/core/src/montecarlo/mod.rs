//! Monte-Carlo estimates of the discounted dividends of barrier and
//! liquidation-dividend strategies.

mod path;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{fmt_sig, sig9};
use crate::model::RegimeModel;
use crate::policy::{BarrierPolicy, ValueFunction};

pub use path::PathPoint;
use path::{simulate_path, Dynamics, PathOutcome};

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_KAPPA: f64 = 5.0;
pub const DEFAULT_MAX_STEP: f64 = 1.0;
pub const DEFAULT_ROULETTE: f64 = 0.1;
/// Perturbation sizes for the dominance probe.
pub const PROBE_DELTAS: [f64; 3] = [0.05, 0.1, 0.2];

/// Samples per rayon task; the reduction runs over chunks in index order.
const CHUNK: usize = 2048;

/// Time stepping inside a regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Fixed Euler steps of size `dt` with boundary checks at grid times.
    Euler,
    /// Adaptive steps with Brownian-bridge maximum and crossing corrections;
    /// `dt` is then the smallest step.
    Bridge { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Defaults to max(100·max 1/θ_i, 20/min r_i).
    pub horizon: Option<f64>,
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub scheme: Scheme,
    pub max_step: f64,
    /// Fictitious self-jump rate ν of the epoch clock; `None` uses 2·max_i r_i.
    pub self_jump_rate: Option<f64>,
    /// Russian roulette threshold on the path weight.
    pub roulette_weight: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: None,
            paths: 100_000,
            seed: 0,
            antithetic: true,
            scheme: Scheme::Bridge {
                kappa: DEFAULT_KAPPA,
            },
            max_step: DEFAULT_MAX_STEP,
            self_jump_rate: None,
            roulette_weight: DEFAULT_ROULETTE,
        }
    }
}

impl SimConfig {
    pub fn with_paths(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            ..Self::default()
        }
    }

    pub fn horizon_for(&self, model: &RegimeModel) -> f64 {
        self.horizon.unwrap_or_else(|| default_horizon(model))
    }

    fn validate(&self, model: &RegimeModel) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.paths == 0 {
            return bad("paths must be at least 1".into());
        }
        if !(self.max_step >= self.dt) {
            return bad(format!("max_step {} is below dt {}", self.max_step, self.dt));
        }
        if let Scheme::Bridge { kappa } = self.scheme {
            if !(kappa > 0.0 && kappa.is_finite()) {
                return bad(format!("kappa must be positive, got {kappa}"));
            }
        }
        if !(0.0..=1.0).contains(&self.roulette_weight) {
            return bad(format!("roulette weight {} outside [0, 1]", self.roulette_weight));
        }
        if let Some(nu) = self.self_jump_rate {
            if !(nu >= 0.0 && nu.is_finite()) {
                return bad(format!("self-jump rate must be non-negative, got {nu}"));
            }
        }
        let min_h = min_horizon(model);
        if let Some(h) = self.horizon {
            if !(h >= min_h) {
                return bad(format!("horizon {h} is below 100·max 1/θ = {min_h}"));
            }
        }
        Ok(())
    }

    fn nu(&self, model: &RegimeModel) -> f64 {
        self.self_jump_rate.unwrap_or_else(|| {
            2.0 * model.states().iter().map(|s| s.discount).fold(0.0, f64::max)
        })
    }
}

fn min_horizon(model: &RegimeModel) -> f64 {
    (0..model.len())
        .map(|i| 100.0 / model.theta(i))
        .fold(0.0, f64::max)
}

fn default_horizon(model: &RegimeModel) -> f64 {
    let min_r = model
        .states()
        .iter()
        .map(|s| s.discount)
        .fold(f64::INFINITY, f64::min);
    min_horizon(model).max(20.0 / min_r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    #[serde(with = "sig9")]
    pub mean: f64,
    #[serde(with = "sig9")]
    pub stderr: f64,
    pub paths: usize,
    /// Average path weight still alive at the horizon.
    #[serde(with = "sig9")]
    pub horizon_mass: f64,
    #[serde(with = "sig9")]
    pub mean_steps: f64,
}

impl SimEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Running (count, mean, M2) merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    horizon: f64,
    steps: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return Moments {
                horizon: self.horizon + o.horizon,
                steps: self.steps + o.steps,
                ..self
            };
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
            horizon: self.horizon + o.horizon,
            steps: self.steps + o.steps,
        }
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run(
    model: &RegimeModel,
    policy: &BarrierPolicy,
    x0: f64,
    i0: usize,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    cfg.validate(model)?;
    policy.check_for(model.len())?;
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::OutOfRange {
            what: "initial reserve",
            value: x0,
        });
    }
    if i0 >= model.len() {
        return Err(Error::OutOfRange {
            what: "initial regime",
            value: i0 as f64,
        });
    }
    let dynamics = Dynamics::new(model, policy, cfg.nu(model));
    let horizon = cfg.horizon_for(model);
    // With antithetic pairs one sample is the average of a path and its mirror.
    let per_sample = if cfg.antithetic { 2 } else { 1 };
    let samples = cfg.paths.div_ceil(per_sample);
    let sample = |k: usize| -> (f64, PathOutcome) {
        let mut rng = path_rng(cfg.seed, k as u64);
        let a = simulate_path(&dynamics, cfg, horizon, x0, i0, 1.0, &mut rng, k, None);
        if !cfg.antithetic {
            return (a.value, a);
        }
        let mut rng = path_rng(cfg.seed, k as u64);
        let b = simulate_path(&dynamics, cfg, horizon, x0, i0, -1.0, &mut rng, k, None);
        let both = PathOutcome {
            value: 0.5 * (a.value + b.value),
            horizon_weight: a.horizon_weight + b.horizon_weight,
            steps: a.steps + b.steps,
        };
        (both.value, both)
    };
    let chunks: Vec<Moments> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            for k in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let (v, out) = sample(k);
                m.push(v);
                m.horizon += out.horizon_weight;
                m.steps += out.steps as f64;
            }
            m
        })
        .collect();
    let total = chunks
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    let n = total.n;
    let var = if n > 1.0 { total.m2 / (n - 1.0) } else { 0.0 };
    let simulated = n * per_sample as f64;
    Ok(SimEstimate {
        mean: total.mean,
        stderr: (var / n).sqrt(),
        paths: simulated as usize,
        horizon_mass: total.horizon / simulated,
        mean_steps: total.steps / simulated,
    })
}

/// Discounted dividends of the modulated barrier strategy started at
/// (x0, i0). Liquidation levels in `policy` are ignored.
pub fn simulate_barrier(
    model: &RegimeModel,
    policy: &BarrierPolicy,
    x0: f64,
    i0: usize,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    run(model, &BarrierPolicy::new(policy.barriers.clone()), x0, i0, cfg)
}

/// Discounted dividends of the liquidation-dividend strategy (d, b).
pub fn simulate_liquidation_dividend(
    model: &RegimeModel,
    d: &[f64],
    b: &[f64],
    x0: f64,
    i0: usize,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    let policy = BarrierPolicy::with_liquidation(b.to_vec(), d.to_vec());
    run(model, &policy, x0, i0, cfg)
}

/// Simulates any policy, with liquidation if it carries levels.
pub fn simulate_policy(
    model: &RegimeModel,
    policy: &BarrierPolicy,
    x0: f64,
    i0: usize,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    run(model, policy, x0, i0, cfg)
}

/// Full trajectories of the first `k` paths (no antithetic partners).
pub fn dump_paths(
    model: &RegimeModel,
    policy: &BarrierPolicy,
    x0: f64,
    i0: usize,
    cfg: &SimConfig,
    k: usize,
) -> Result<Vec<PathPoint>> {
    cfg.validate(model)?;
    policy.check_for(model.len())?;
    let dynamics = Dynamics::new(model, policy, cfg.nu(model));
    let horizon = cfg.horizon_for(model);
    let mut points = Vec::new();
    for p in 0..k {
        let mut rng = path_rng(cfg.seed, p as u64);
        simulate_path(&dynamics, cfg, horizon, x0, i0, 1.0, &mut rng, p, Some(&mut points));
    }
    Ok(points)
}

pub fn write_paths_csv<W: Write>(points: &[PathPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "path,t,regime,reserve,cum_dividend,discount")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.path,
            fmt_sig(p.t),
            p.regime,
            fmt_sig(p.reserve),
            fmt_sig(p.cum_dividend),
            fmt_sig(p.discount)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceEntry {
    #[serde(with = "sig9")]
    pub delta: f64,
    #[serde(with = "sig9")]
    pub x0: f64,
    pub regime: usize,
    pub estimate: SimEstimate,
    #[serde(with = "sig9")]
    pub value: f64,
    /// estimate ≤ value + 3·stderr
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub entries: Vec<DominanceEntry>,
}

impl DominanceReport {
    pub fn all_dominated(&self) -> bool {
        self.entries.iter().all(|e| e.dominated)
    }
}

/// Simulates `optimal` shifted by 0 and ±δ for each δ, at every probe
/// point, and checks the estimates never beat `v` by more than 3 stderr.
pub fn dominance_probe(
    model: &RegimeModel,
    v: &dyn ValueFunction,
    optimal: &BarrierPolicy,
    deltas: &[f64],
    probes: &[(f64, usize)],
    cfg: &SimConfig,
) -> Result<DominanceReport> {
    let mut shifts = vec![0.0];
    for &d in deltas {
        shifts.push(d);
        shifts.push(-d);
    }
    let mut entries = Vec::new();
    for &delta in &shifts {
        let policy = optimal.shifted(delta);
        for &(x0, regime) in probes {
            let estimate = run(model, &policy, x0, regime, cfg)?;
            let value = v.value(x0, regime);
            entries.push(DominanceEntry {
                delta,
                x0,
                regime,
                dominated: estimate.mean <= value + 3.0 * estimate.stderr,
                estimate,
                value,
            });
        }
    }
    Ok(DominanceReport { entries })
}
