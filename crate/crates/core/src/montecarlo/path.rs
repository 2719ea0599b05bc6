//! One controlled reserve path.
//!
//! Discounting and regime switching are handled together by epochs: in
//! regime i an epoch lasts Exp(θ_i + ν), where θ_i = r_i − q_ii is the total
//! hazard of "discounted away" or "switch" and ν is a fictitious self-jump
//! rate. At the end of an epoch the path weight is multiplied by
//! (−q_ii + ν)/(θ_i + ν), the probability that the event was not a discount
//! kill, and the next regime is drawn given survival. Dividends inside an
//! epoch are credited at the current weight, so no time discretisation
//! enters the discounting.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::model::RegimeModel;
use crate::policy::BarrierPolicy;

use super::{Scheme, SimConfig};

/// One row of the optional path dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub path: usize,
    pub t: f64,
    pub regime: usize,
    pub reserve: f64,
    /// Weighted dividends so far.
    pub cum_dividend: f64,
    /// Current path weight, an unbiased stand-in for e^{−Λ_t}.
    pub discount: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PathOutcome {
    pub value: f64,
    /// Weight still alive when the horizon was reached.
    pub horizon_weight: f64,
    pub steps: u64,
}

/// Per-regime constants precomputed once per simulation.
pub(crate) struct Dynamics {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    /// θ_i + ν
    epoch_rate: Vec<f64>,
    /// (−q_ii + ν)/(θ_i + ν)
    survival: Vec<f64>,
    /// ν/(−q_ii + ν)
    stay: Vec<f64>,
    generator: Vec<Vec<f64>>,
    barrier: Vec<f64>,
    lower: Vec<f64>,
    liquidates: Vec<bool>,
}

impl Dynamics {
    pub(crate) fn new(model: &RegimeModel, policy: &BarrierPolicy, nu: f64) -> Self {
        let n = model.len();
        let states = model.states();
        let theta: Vec<f64> = (0..n).map(|i| model.theta(i)).collect();
        let out: Vec<f64> = (0..n).map(|i| -model.rate(i, i)).collect();
        let lower: Vec<f64> = (0..n).map(|i| policy.liquidation_level(i)).collect();
        Self {
            mu: states.iter().map(|s| s.mu).collect(),
            sigma: states.iter().map(|s| s.sigma).collect(),
            epoch_rate: theta.iter().map(|t| t + nu).collect(),
            survival: (0..n).map(|i| (out[i] + nu) / (theta[i] + nu)).collect(),
            stay: (0..n)
                .map(|i| if out[i] + nu > 0.0 { nu / (out[i] + nu) } else { 1.0 })
                .collect(),
            generator: model.generator().to_vec(),
            barrier: policy.barriers.clone(),
            liquidates: lower.iter().map(|&d| d > 0.0).collect(),
            lower,
        }
    }

    fn next_regime(&self, i: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        if u < self.stay[i] {
            return i;
        }
        let out = -self.generator[i][i];
        let mut v = (u - self.stay[i]) / (1.0 - self.stay[i]) * out;
        let mut last = i;
        for (j, &q) in self.generator[i].iter().enumerate() {
            if j == i || q <= 0.0 {
                continue;
            }
            last = j;
            if v < q {
                return j;
            }
            v -= q;
        }
        last
    }
}

/// Mutable per-path state.
struct Walker<'a> {
    dyn_: &'a Dynamics,
    cfg: &'a SimConfig,
    sign: f64,
    t: f64,
    regime: usize,
    u: f64,
    weight: f64,
    value: f64,
    steps: u64,
}

enum StepEnd {
    Alive,
    Stopped,
}

impl Walker<'_> {
    /// Lump payouts at time 0 and after switches: down to the barrier, or
    /// everything when the reserve sits at or below the liquidation level.
    fn enter_regime(&mut self) -> StepEnd {
        let i = self.regime;
        if self.u <= 0.0 {
            return StepEnd::Stopped;
        }
        if self.dyn_.liquidates[i] && self.u <= self.dyn_.lower[i] {
            self.value += self.weight * self.u;
            self.u = 0.0;
            return StepEnd::Stopped;
        }
        let b = self.dyn_.barrier[i];
        if self.u > b {
            self.value += self.weight * (self.u - b);
            self.u = b;
        }
        if self.u <= 0.0 {
            StepEnd::Stopped
        } else {
            StepEnd::Alive
        }
    }

    fn normal(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.sign * z
    }

    /// Advances by at most `limit` within the current regime.
    fn step(&mut self, limit: f64, rng: &mut ChaCha8Rng) -> (f64, StepEnd) {
        self.steps += 1;
        let i = self.regime;
        let (mu, sigma) = (self.dyn_.mu[i], self.dyn_.sigma[i]);
        let b = self.dyn_.barrier[i];
        let lower = self.dyn_.lower[i];
        let liquidates = self.dyn_.liquidates[i];
        match self.cfg.scheme {
            Scheme::Euler => {
                let h = self.cfg.dt.min(limit);
                let y = self.u + mu * h + sigma * h.sqrt() * self.normal(rng);
                let y = if y > b {
                    self.value += self.weight * (y - b);
                    b
                } else {
                    y
                };
                self.u = y;
                if y <= lower {
                    if liquidates && y > 0.0 {
                        self.value += self.weight * y;
                    }
                    return (h, StepEnd::Stopped);
                }
                (h, StepEnd::Alive)
            }
            Scheme::Bridge { kappa } => {
                // Sized so the farther boundary is κ standard deviations away;
                // the nearer one is handled exactly by the bridge.
                let far = (self.u - lower).max(b - self.u);
                let h = (far / (kappa * sigma))
                    .powi(2)
                    .clamp(self.cfg.dt, self.cfg.max_step)
                    .min(limit);
                let s2h = sigma * sigma * h;
                let y = self.u + mu * h + s2h.sqrt() * self.normal(rng);
                let v: f64 = rng.random::<f64>();
                let v = v.max(f64::MIN_POSITIVE);
                let span = y - self.u;
                let max = 0.5 * (self.u + y + (span * span - 2.0 * s2h * v.ln()).sqrt());
                let payout = (max - b).max(0.0);
                let end = y - payout;
                self.value += self.weight * payout;
                let w: f64 = rng.random::<f64>();
                let crossed = end <= lower
                    || w < (-2.0 * (self.u - lower) * (end - lower) / s2h).exp();
                if crossed {
                    if liquidates {
                        self.value += self.weight * lower;
                    }
                    self.u = end.min(lower).max(0.0);
                    return (h, StepEnd::Stopped);
                }
                self.u = end;
                (h, StepEnd::Alive)
            }
        }
    }

    fn record(&self, path: usize, out: &mut Option<&mut Vec<PathPoint>>) {
        if let Some(v) = out {
            v.push(PathPoint {
                path,
                t: self.t,
                regime: self.regime,
                reserve: self.u,
                cum_dividend: self.value,
                discount: self.weight,
            });
        }
    }
}

/// Simulates one path; `sign` = −1 gives the antithetic partner.
#[allow(clippy::too_many_arguments)]
pub(crate) fn simulate_path(
    dyn_: &Dynamics,
    cfg: &SimConfig,
    horizon: f64,
    x0: f64,
    i0: usize,
    sign: f64,
    rng: &mut ChaCha8Rng,
    path: usize,
    mut trace: Option<&mut Vec<PathPoint>>,
) -> PathOutcome {
    let mut w = Walker {
        dyn_,
        cfg,
        sign,
        t: 0.0,
        regime: i0,
        u: x0,
        weight: 1.0,
        value: 0.0,
        steps: 0,
    };
    w.record(path, &mut trace);
    let finish = |w: &Walker, horizon_weight: f64| PathOutcome {
        value: w.value,
        horizon_weight,
        steps: w.steps,
    };
    if let StepEnd::Stopped = w.enter_regime() {
        w.record(path, &mut trace);
        return finish(&w, 0.0);
    }
    w.record(path, &mut trace);
    loop {
        let i = w.regime;
        let e: f64 = Exp1.sample(rng);
        let epoch_end = (w.t + e / dyn_.epoch_rate[i]).min(horizon);
        while w.t < epoch_end {
            let (h, end) = w.step(epoch_end - w.t, rng);
            w.t = if epoch_end - w.t <= h { epoch_end } else { w.t + h };
            w.record(path, &mut trace);
            if let StepEnd::Stopped = end {
                return finish(&w, 0.0);
            }
        }
        if w.t >= horizon {
            return finish(&w, w.weight);
        }
        w.weight *= dyn_.survival[i];
        if w.weight < cfg.roulette_weight {
            let u: f64 = rng.random();
            if u * cfg.roulette_weight >= w.weight {
                return finish(&w, 0.0);
            }
            w.weight = cfg.roulette_weight;
        }
        w.regime = dyn_.next_regime(i, rng);
        if let StepEnd::Stopped = w.enter_regime() {
            w.record(path, &mut trace);
            return finish(&w, 0.0);
        }
        if w.regime != i {
            w.record(path, &mut trace);
        }
    }
}
