//! Mixed drift signs: liquidation at d₀ and a dividend barrier b₀ in the
//! negative-drift regime, a dividend barrier b₁ in the other, with
//! 0 < d₀ < b₁ < b₀. Internally regime 0 is the negative one.

use serde::Serialize;

use super::liquidation::{liquidate_everywhere_candidate, liquidation_levels, CriticalLevel};
use super::piecewise::{Branch, ExpTerm, Piecewise};
use super::quartic::{quartic_roots, Characteristic, QuarticRoots};
use super::{distinct_candidates, jittered_starts, NewtonSummary};
use crate::analytics::{characteristic_roots, single_regime_barrier, RootPair};
use crate::error::{Error, Result};
use crate::format::{sig9, sig9_vec};
use crate::model::RegimeModel;
use crate::numeric::{damped_newton, solve_linear, NewtonOptions};
use crate::policy::BarrierPolicy;

/// Named constants of the explicit mixed-case value functions, in the
/// relabelled frame (index 0 = negative drift).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseConstants {
    #[serde(with = "sig9")]
    pub alpha: f64,
    #[serde(with = "sig9_vec")]
    pub beta: [f64; 2],
    #[serde(with = "sig9")]
    pub gamma: f64,
    #[serde(with = "sig9_vec")]
    pub delta: [f64; 2],
    /// ε_{i,j}, i over the two single-regime roots, j over λ₁..λ₄.
    pub epsilon: [[f64; 4]; 2],
    #[serde(with = "sig9")]
    pub phi: f64,
    /// k₁ = δ₂/φ, k₂ = −δ₁/φ: V₁ = k₁e^{λ₁¹x} + k₂e^{λ₂¹x} + β₁(x + μ₁/θ₁) on [0, d₀].
    #[serde(with = "sig9_vec")]
    pub k: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativeCaseSolution {
    /// Regime with negative drift, the one that liquidates.
    pub negative_regime: usize,
    #[serde(with = "sig9")]
    pub liquidation: f64,
    /// (b₀*, b₁*) in the caller's labels.
    #[serde(with = "sig9_vec")]
    pub barriers: [f64; 2],
    pub roots: QuarticRoots,
    /// B with V(x, negative) = Σ B_j e^{λ_j x} on [d₀, b₁].
    #[serde(with = "sig9_vec")]
    pub b: [f64; 4],
    pub constants: CaseConstants,
    #[serde(with = "sig9")]
    pub linear_residual: f64,
    /// The three-equation barrier system evaluated at the solution.
    #[serde(with = "sig9_vec")]
    pub system_residuals: [f64; 3],
    /// Δ of the negative regime against the liquidate-everywhere candidate.
    pub critical_level: CriticalLevel,
    pub newton: NewtonSummary,
    pub value: [Piecewise; 2],
}

impl NegativeCaseSolution {
    pub fn evaluate(&self, x: f64, regime: usize) -> f64 {
        self.value[regime].value(x)
    }

    pub fn policy(&self) -> BarrierPolicy {
        let mut d = vec![0.0; 2];
        d[self.negative_regime] = self.liquidation;
        BarrierPolicy::with_liquidation(self.barriers.to_vec(), d)
    }
}

struct MixedSetup<'m> {
    model: &'m RegimeModel,
    ch: Characteristic,
    roots: QuarticRoots,
    /// Single-regime roots at θ: [regime 0, regime 1].
    single: [RootPair; 2],
    beta: [f64; 2],
    theta: [f64; 2],
}

struct MixedState {
    d0: f64,
    b0: f64,
    b1: f64,
    bt: [f64; 4],
    refs: [f64; 4],
    /// Rebased (K₁, K₂) of V₁ on [0, d₀]: K₁e^{λ₁¹x} + K₂e^{λ₂¹(x−d₀)}.
    left: [f64; 2],
    residual: [f64; 3],
    linear_residual: f64,
    condition: f64,
}

impl<'m> MixedSetup<'m> {
    fn new(model: &'m RegimeModel) -> Result<Self> {
        let theta = [model.theta(0), model.theta(1)];
        let single = [
            characteristic_roots(model.state(0).mu, model.state(0).sigma, theta[0])?,
            characteristic_roots(model.state(1).mu, model.state(1).sigma, theta[1])?,
        ];
        Ok(Self {
            model,
            ch: Characteristic::new(model)?,
            roots: quartic_roots(model)?,
            single,
            beta: [-model.rate(0, 0) / theta[0], -model.rate(1, 1) / theta[1]],
            theta,
        })
    }

    fn q00(&self) -> f64 {
        self.model.rate(0, 0)
    }

    fn alpha(&self) -> f64 {
        let (m, p) = (self.single[0].lambda_minus, self.single[0].lambda_plus);
        p / (p - m)
    }

    /// k-th derivative of V₁ = q₀₀⁻¹ Σ B̃ F₀(λ) e^{λ(x−ref)} on [d₀, b₁].
    fn middle_v1(&self, st_bt: &[f64; 4], refs: &[f64; 4], x: f64, k: i32) -> f64 {
        let lam = self.roots.lambda;
        (0..4)
            .map(|j| st_bt[j] * self.ch.f(0, lam[j]) * lam[j].powi(k) * (lam[j] * (x - refs[j])).exp())
            .sum::<f64>()
            / self.q00()
    }

    fn middle_v0(&self, bt: &[f64; 4], refs: &[f64; 4], x: f64, k: i32) -> f64 {
        let lam = self.roots.lambda;
        (0..4)
            .map(|j| bt[j] * lam[j].powi(k) * (lam[j] * (x - refs[j])).exp())
            .sum()
    }

    /// Derivative of order 1 or 2 of V₀ on [b₁, b₀].
    fn upper_v0(&self, x: f64, b0: f64, k: i32) -> f64 {
        let (m, p) = (self.single[0].lambda_minus, self.single[0].lambda_plus);
        let a = self.alpha();
        let h = (1.0 - self.beta[0])
            * (a * m.powi(k - 1) * (m * (x - b0)).exp()
                + (1.0 - a) * p.powi(k - 1) * (p * (x - b0)).exp());
        if k == 1 {
            h + self.beta[0]
        } else {
            h
        }
    }

    fn state(&self, d0: f64, b0: f64, b1: f64) -> Result<MixedState> {
        if ![d0, b0, b1].iter().all(|v| v.is_finite()) {
            return Err(Error::OutOfRange {
                what: "mixed-case iterate",
                value: f64::NAN,
            });
        }
        let lam = self.roots.lambda;
        let refs = lam.map(|l| if l < 0.0 { d0 } else { b1 });
        let mut a = [[0.0; 4]; 4];
        for j in 0..4 {
            let ed = (lam[j] * (d0 - refs[j])).exp();
            let eb = (lam[j] * (b1 - refs[j])).exp();
            let f0 = self.ch.f(0, lam[j]);
            a[0][j] = ed;
            a[1][j] = lam[j] * ed;
            a[2][j] = f0 * lam[j] * eb;
            a[3][j] = f0 * lam[j] * lam[j] * eb;
        }
        let h = [d0, 1.0, self.q00(), 0.0];
        let sol = solve_linear(a, h)?;
        let bt = sol.x;
        let linear_residual = (0..4)
            .map(|r| ((0..4).map(|j| a[r][j] * bt[j]).sum::<f64>() - h[r]).abs())
            .fold(0.0, f64::max);

        // V₁ on [0, d₀] from V₁(0) = 0 and V₁″(d₀) matching the middle branch.
        let (l1, l2) = (self.single[1].lambda_minus, self.single[1].lambda_plus);
        let s1 = self.model.state(1);
        let shift = self.beta[1] * s1.mu / self.theta[1];
        let m = [
            [1.0, (-l2 * d0).exp()],
            [l1 * l1 * (l1 * d0).exp(), l2 * l2],
        ];
        let left = solve_linear(m, [-shift, self.middle_v1(&bt, &refs, d0, 2)])?.x;
        let left_slope = left[0] * l1 * (l1 * d0).exp() + left[1] * l2 + self.beta[1];
        let r1 = left_slope - self.middle_v1(&bt, &refs, d0, 1);
        let r2 = self.middle_v0(&bt, &refs, b1, 1) - self.upper_v0(b1, b0, 1);
        let r3 = self.middle_v0(&bt, &refs, b1, 2) - self.upper_v0(b1, b0, 2);
        Ok(MixedState {
            d0,
            b0,
            b1,
            bt,
            refs,
            left,
            residual: [r1, r2, r3],
            linear_residual,
            condition: sol.condition_estimate,
        })
    }

    fn constants(&self, st: &MixedState) -> CaseConstants {
        let lam = self.roots.lambda;
        let (l1, l2) = (self.single[1].lambda_minus, self.single[1].lambda_plus);
        let s1 = self.model.state(1);
        let d0 = st.d0;
        let epsilon = [l1, l2].map(|li| lam.map(|lj| (li * d0).exp() * (li * li - li * lj)));
        let phi = l1 * l1 * (l1 * d0).exp() - l2 * l2 * (l2 * d0).exp();
        let r2 = self.middle_v1(&st.bt, &st.refs, d0, 2);
        let delta = [l1, l2]
            .map(|li| s1.mu * self.beta[1] / self.theta[1] * li * li * (li * d0).exp() + r2);
        CaseConstants {
            alpha: self.alpha(),
            beta: self.beta,
            gamma: self.middle_v1(&st.bt, &st.refs, st.b1, 0) - st.b1
                + self.model.state(0).mu / self.theta[0],
            delta,
            epsilon,
            phi,
            k: [delta[1] / phi, -delta[0] / phi],
        }
    }

    /// The three-equation barrier system, written with absolute B.
    fn system_residuals(&self, st: &MixedState) -> [f64; 3] {
        let lam = self.roots.lambda;
        let (l1, l2) = (self.single[1].lambda_minus, self.single[1].lambda_plus);
        let (am, ap) = (self.single[0].lambda_minus, self.single[0].lambda_plus);
        let s0 = self.model.state(0);
        let s1 = self.model.state(1);
        let q0 = self.q00();
        let d0 = st.d0;
        let c = self.constants(st);
        // B_j e^{λ_j x} without forming B_j itself.
        let be = |j: usize, x: f64| st.bt[j] * (lam[j] * (x - st.refs[j])).exp();
        let lhs: f64 = (0..4)
            .map(|j| lam[j] * self.ch.f(0, lam[j]) * be(j, d0) * (c.epsilon[0][j] - c.epsilon[1][j]))
            .sum::<f64>()
            / (q0 * self.beta[1]);
        let rhs = c.phi + ((l1 + l2) * d0).exp() * s1.mu * (l1 * l2 * l2 - l2 * l1 * l1) / self.theta[1];
        let g = st.b1 - st.b0;
        let e2 = (0..4).map(|j| lam[j] * be(j, st.b1)).sum::<f64>()
            - (s0.discount * (ap * (am * g).exp() - am * (ap * g).exp())
                / ((ap - am) * self.theta[0])
                + q0 / (q0 - s0.discount));
        let e3 = (0..4).map(|j| lam[j] * lam[j] * be(j, st.b1)).sum::<f64>()
            - am * ap * s0.discount / ((ap - am) * self.theta[0])
                * ((am * g).exp() - (ap * g).exp());
        [lhs - rhs, e2, e3]
    }

    /// Piecewise V₀, V₁ in the relabelled frame.
    fn value(&self, st: &MixedState) -> [Piecewise; 2] {
        let lam = self.roots.lambda;
        let s0 = self.model.state(0);
        let s1 = self.model.state(1);
        let (m, p) = (self.single[0].lambda_minus, self.single[0].lambda_plus);
        let (l1, l2) = (self.single[1].lambda_minus, self.single[1].lambda_plus);
        let a = self.alpha();
        let gamma = self.middle_v1(&st.bt, &st.refs, st.b1, 0) - st.b1 + s0.mu / self.theta[0];

        let mid0 = Branch::exponential(
            st.d0,
            st.b1,
            (0..4).map(|j| ExpTerm::new(st.bt[j], lam[j], st.refs[j])).collect(),
        );
        let upper0 = Branch {
            lo: st.b1,
            hi: Some(st.b0),
            terms: vec![
                ExpTerm::new((1.0 - self.beta[0]) * a / m, m, st.b0),
                ExpTerm::new((1.0 - self.beta[0]) * (1.0 - a) / p, p, st.b0),
            ],
            slope: self.beta[0],
            intercept: self.beta[0] * gamma,
        };
        let top0 = upper0.value(st.b0);
        let v0 = Piecewise::new(vec![
            Branch::linear(0.0, Some(st.d0), 1.0, 0.0),
            mid0,
            upper0,
            Branch::linear(st.b0, None, 1.0, top0 - st.b0),
        ]);

        let q0 = self.q00();
        let left1 = Branch {
            lo: 0.0,
            hi: Some(st.d0),
            terms: vec![
                ExpTerm::new(st.left[0], l1, 0.0),
                ExpTerm::new(st.left[1], l2, st.d0),
            ],
            slope: self.beta[1],
            intercept: self.beta[1] * s1.mu / self.theta[1],
        };
        let mid1 = Branch::exponential(
            st.d0,
            st.b1,
            (0..4)
                .map(|j| ExpTerm::new(st.bt[j] * self.ch.f(0, lam[j]) / q0, lam[j], st.refs[j]))
                .collect(),
        );
        let top1 = mid1.value(st.b1);
        let v1 = Piecewise::new(vec![
            left1,
            mid1,
            Branch::linear(st.b1, None, 1.0, top1 - st.b1),
        ]);
        [v0, v1]
    }
}

fn admissibility(d0: f64, b0: f64, b1: f64) -> std::result::Result<(), String> {
    let root = format!("root (d0, b0, b1) = ({d0:.6}, {b0:.6}, {b1:.6})");
    if !(d0 > 0.0) {
        Err(format!("{root} violates 0 < d0"))
    } else if !(d0 < b1) {
        Err(format!("{root} violates d0 < b1"))
    } else if !(b1 < b0) {
        Err(format!("{root} violates b1 < b0"))
    } else {
        Ok(())
    }
}

pub fn solve_negative(model: &RegimeModel, tol: f64) -> Result<NegativeCaseSolution> {
    if model.len() != 2 {
        return Err(Error::WrongStateCount { found: model.len() });
    }
    let mu = [model.state(0).mu, model.state(1).mu];
    let neg = match (mu[0] < 0.0, mu[1] < 0.0) {
        (true, false) if mu[1] > 0.0 => 0,
        (false, true) if mu[0] > 0.0 => 1,
        _ => {
            let state = if mu[0] >= 0.0 { 0 } else { 1 };
            return Err(Error::DriftHypothesisViolated {
                state,
                mu: mu[state],
            });
        }
    };
    let relabelled;
    let m = if neg == 0 {
        model
    } else {
        relabelled = model.permuted(&[1, 0])?;
        &relabelled
    };

    let candidate = liquidate_everywhere_candidate(m, 0)?;
    let cap = 10.0 * candidate.barrier.max(1.0);
    let critical_level = liquidation_levels(m, &candidate, cap).delta[0];
    if critical_level.is_infinite() {
        return Err(Error::LiquidateEverywhere { regime: neg });
    }

    let setup = MixedSetup::new(m)?;
    let s1 = m.state(1);
    let a1 = single_regime_barrier(s1.mu, s1.sigma, m.theta(1))?;
    let anchor = [0.05 * a1, 1.2 * a1, a1];
    let mut starts = vec![anchor];
    starts.extend(jittered_starts(&anchor, 8));
    for d in [0.02, 0.1, 0.3] {
        for b1 in [0.8 * a1, a1, 1.2 * a1] {
            for gap in [0.01, 0.1, 0.3] {
                starts.push([d * a1, b1 + gap * a1, b1]);
            }
        }
    }
    let opts = NewtonOptions {
        tol,
        ..NewtonOptions::default()
    };
    let mut found = Vec::new();
    let mut singular = 0;
    for x0 in &starts {
        let f = |x: &[f64; 3]| setup.state(x[0], x[1], x[2]).map(|st| st.residual);
        match damped_newton(f, *x0, &opts) {
            Ok(out) => found.push((0usize, out.x, out.iterations)),
            Err(Error::SingularLinearSystem { .. }) => singular += 1,
            Err(_) => {}
        }
    }

    let mut notes = Vec::new();
    let mut best: Option<(f64, NegativeCaseSolution)> = None;
    let roots = distinct_candidates(found);
    for (_, x, iterations) in &roots {
        let [d0, b0, b1] = *x;
        if let Err(why) = admissibility(d0, b0, b1) {
            notes.push(why);
            continue;
        }
        let st = match setup.state(d0, b0, b1) {
            Ok(st) => st,
            Err(e) => {
                notes.push(e.to_string());
                continue;
            }
        };
        let mut value = setup.value(&st);
        if let Err(why) = super::positive::shape_check(&value, b0, false) {
            notes.push(format!("root ({d0:.6}, {b0:.6}, {b1:.6}) rejected, {why}"));
            continue;
        }
        let score = value[0].value(b0) + value[1].value(b0);
        if best.as_ref().is_some_and(|(s, _)| *s >= score - 1e-12) {
            continue;
        }
        let constants = setup.constants(&st);
        let system_residuals = setup.system_residuals(&st);
        let lam = setup.roots.lambda;
        let b = std::array::from_fn(|j| st.bt[j] * (-lam[j] * st.refs[j]).exp());
        let mut barriers = [b0, b1];
        if neg == 1 {
            barriers.swap(0, 1);
            value.swap(0, 1);
        }
        let sol = NegativeCaseSolution {
            negative_regime: neg,
            liquidation: d0,
            barriers,
            roots: setup.roots,
            b,
            constants,
            linear_residual: st.linear_residual,
            system_residuals,
            critical_level,
            newton: NewtonSummary {
                iterations: *iterations,
                starts: starts.len(),
                candidates: roots.len(),
                condition_estimate: st.condition,
            },
            value,
        };
        best = Some((score, sol));
    }
    match best {
        Some((_, sol)) => Ok(sol),
        None if singular == starts.len() => Err(Error::SingularLinearSystem { pivot: 0.0 }),
        None => {
            if notes.is_empty() {
                notes.push("no start converged".into());
            }
            Err(Error::OrderingUnresolved(notes.join("; ")))
        }
    }
}
