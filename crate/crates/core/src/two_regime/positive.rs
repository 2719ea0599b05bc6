//! Both drifts positive: modulated barrier strategy with smooth fit at both
//! barriers. Regime ı has the lower barrier, ȷ the upper one.

use serde::Serialize;

use super::piecewise::{Branch, ExpTerm, Piecewise};
use super::quartic::{quartic_roots, Characteristic, QuarticRoots};
use super::{distinct_candidates, jittered_starts, NewtonSummary};
use crate::analytics::{apriori_bounds, single_regime_barrier, RootPair};
use crate::error::{Error, Result};
use crate::format::{sig9, sig9_vec};
use crate::model::RegimeModel;
use crate::numeric::{damped_newton, solve_linear, NewtonOptions};

#[derive(Debug, Clone, Serialize)]
pub struct PositiveCaseSolution {
    /// (b₀*, b₁*)
    #[serde(with = "sig9_vec")]
    pub barriers: [f64; 2],
    /// Regime holding the lower barrier (ı).
    pub lower_regime: usize,
    /// True when b₁* < b₀*, i.e. the labels were swapped relative to the
    /// b₀ < b₁ statement.
    pub swapped: bool,
    pub roots: QuarticRoots,
    /// d with V(x,ı) = Σ d_j e^{λ_j x} below b_ı.
    #[serde(with = "sig9_vec")]
    pub d: [f64; 4],
    /// k₁..k₄ of the band representation of V(·,ȷ) on (b_ı, b_ȷ).
    #[serde(with = "sig9_vec")]
    pub k: [f64; 4],
    #[serde(with = "sig9")]
    pub linear_residual: f64,
    pub newton: NewtonSummary,
    pub value: [Piecewise; 2],
}

impl PositiveCaseSolution {
    pub fn evaluate(&self, x: f64, regime: usize) -> f64 {
        self.value[regime].value(x)
    }
}

/// Fixed pieces of the problem shared across residual evaluations.
pub(crate) struct PositiveSetup<'m> {
    model: &'m RegimeModel,
    ch: Characteristic,
    roots: QuarticRoots,
    band_roots: [RootPair; 2],
}

/// Everything computed at one barrier pair for labeling ı.
pub(crate) struct PositiveState {
    lo: usize,
    bl: f64,
    bh: f64,
    /// Rebased coefficients d̃ and their reference points.
    dt: [f64; 4],
    refs: [f64; 4],
    residual: [f64; 2],
    linear_residual: f64,
    condition: f64,
}

impl<'m> PositiveSetup<'m> {
    pub(crate) fn new(model: &'m RegimeModel) -> Result<Self> {
        let ch = Characteristic::new(model)?;
        let roots = quartic_roots(model)?;
        Ok(Self {
            model,
            ch,
            roots,
            band_roots: roots.single,
        })
    }

    /// Smooth-fit residuals of V(·,ȷ) at b_ı for labeling `lo` = ı.
    pub(crate) fn state(&self, lo: usize, bl: f64, bh: f64) -> Result<PositiveState> {
        if !(bl > 0.0 && bh > 0.0 && bl.is_finite() && bh.is_finite()) {
            return Err(Error::OutOfRange {
                what: "barrier iterate",
                value: bl.min(bh),
            });
        }
        let hi = 1 - lo;
        let lam = self.roots.lambda;
        let refs = lam.map(|l| if l < 0.0 { 0.0 } else { bl });
        let fl = lam.map(|l| self.ch.f(lo, l));
        let mut a = [[0.0; 4]; 4];
        for j in 0..4 {
            let e0 = (lam[j] * (0.0 - refs[j])).exp();
            let eb = (lam[j] * (bl - refs[j])).exp();
            a[0][j] = e0;
            a[1][j] = fl[j] * e0;
            a[2][j] = lam[j] * eb;
            a[3][j] = lam[j] * lam[j] * eb;
        }
        let h = [0.0, 0.0, 1.0, 0.0];
        let sol = solve_linear(a, h)?;
        let dt = sol.x;
        let linear_residual = (0..4)
            .map(|r| ((0..4).map(|j| a[r][j] * dt[j]).sum::<f64>() - h[r]).abs())
            .fold(0.0, f64::max);

        let qll = self.model.rate(lo, lo);
        let mut below = [0.0; 2];
        for j in 0..4 {
            let eb = (lam[j] * (bl - refs[j])).exp();
            below[0] += dt[j] * fl[j] * lam[j] * eb / qll;
            below[1] += dt[j] * fl[j] * lam[j] * lam[j] * eb / qll;
        }
        let band = self.band_terms(hi, bl, bh);
        let above = [
            band.iter().map(|t| t.coeff * t.exponent * (t.exponent * (bl - t.x_ref)).exp()).sum::<f64>()
                + self.band_slope(hi),
            band.iter()
                .map(|t| t.coeff * t.exponent.powi(2) * (t.exponent * (bl - t.x_ref)).exp())
                .sum::<f64>(),
        ];
        Ok(PositiveState {
            lo,
            bl,
            bh,
            dt,
            refs,
            residual: [below[0] - above[0], below[1] - above[1]],
            linear_residual,
            condition: sol.condition_estimate,
        })
    }

    /// β_ȷ = −q_ȷȷ/θ_ȷ, the slope of the particular solution on the band.
    fn band_slope(&self, hi: usize) -> f64 {
        -self.model.rate(hi, hi) / self.model.theta(hi)
    }

    /// Homogeneous part of V(·,ȷ) on (b_ı, b_ȷ) with V′(b_ȷ)=1, V″(b_ȷ)=0.
    /// The negative-exponent term is referenced at b_ı, the positive one at b_ȷ.
    fn band_terms(&self, hi: usize, bl: f64, bh: f64) -> [ExpTerm; 2] {
        let (l1, l2) = (
            self.band_roots[hi].lambda_minus,
            self.band_roots[hi].lambda_plus,
        );
        let ratio = self.model.state(hi).discount / self.model.theta(hi);
        let k1 = ratio * l2 / (l1 * (l2 - l1));
        let k2 = ratio * l1 / (l2 * (l1 - l2));
        [
            ExpTerm::new(k1 * (l1 * (bl - bh)).exp(), l1, bl),
            ExpTerm::new(k2, l2, bh),
        ]
    }

    fn build(&self, st: &PositiveState, newton: NewtonSummary) -> PositiveCaseSolution {
        let (lo, hi) = (st.lo, 1 - st.lo);
        let lam = self.roots.lambda;
        let qll = self.model.rate(lo, lo);
        let terms_lo: Vec<ExpTerm> = (0..4)
            .map(|j| ExpTerm::new(st.dt[j], lam[j], st.refs[j]))
            .collect();
        let terms_hi: Vec<ExpTerm> = (0..4)
            .map(|j| ExpTerm::new(st.dt[j] * self.ch.f(lo, lam[j]) / qll, lam[j], st.refs[j]))
            .collect();
        let below_lo = Branch::exponential(0.0, st.bl, terms_lo);
        let v_lo_b = below_lo.value(st.bl);
        let v_lo = Piecewise::new(vec![
            below_lo,
            Branch::linear(st.bl, None, 1.0, v_lo_b - st.bl),
        ]);

        let beta = self.band_slope(hi);
        let s = self.model.state(hi);
        let k4 = beta * (v_lo_b - st.bl + s.mu / self.model.theta(hi));
        let band = self.band_terms(hi, st.bl, st.bh);
        let band_branch = Branch {
            lo: st.bl,
            hi: Some(st.bh),
            terms: band.to_vec(),
            slope: beta,
            intercept: k4,
        };
        let v_hi_b = band_branch.value(st.bh);
        let v_hi = Piecewise::new(vec![
            Branch::exponential(0.0, st.bl, terms_hi),
            band_branch,
            Branch::linear(st.bh, None, 1.0, v_hi_b - st.bh),
        ]);

        let d = std::array::from_fn(|j| st.dt[j] * (-lam[j] * st.refs[j]).exp());
        let k = [
            band[0].absolute_coeff(),
            band[1].absolute_coeff(),
            beta,
            k4,
        ];
        let mut barriers = [0.0; 2];
        barriers[lo] = st.bl;
        barriers[hi] = st.bh;
        let mut value = [v_lo.clone(), v_hi.clone()];
        value[lo] = v_lo;
        value[hi] = v_hi;
        PositiveCaseSolution {
            barriers,
            lower_regime: lo,
            swapped: lo == 1,
            roots: self.roots,
            d,
            k,
            linear_residual: st.linear_residual,
            newton: NewtonSummary {
                condition_estimate: st.condition,
                ..newton
            },
            value,
        }
    }
}

/// Coefficients through the Cramér representation: d₃, d₄
/// eliminated via V(0,·)=0, then (d₁,d₂) = G⁻¹(g̃₂″(b), −g̃₁″(b)).
pub fn cramer_coefficients(model: &RegimeModel, lo: usize, bl: f64) -> Result<[f64; 4]> {
    let ch = Characteristic::new(model)?;
    let lam = quartic_roots(model)?.lambda;
    let f = lam.map(|l| ch.f(lo, l));
    let den = f[3] - f[2];
    let c = [(f[0] - f[3]) / den, (f[1] - f[3]) / den];
    let gt = |k: usize, x: f64, order: i32| -> f64 {
        let e = |j: usize| lam[j].powi(order) * (lam[j] * x).exp();
        e(k) + c[k] * e(2) - (c[k] + 1.0) * e(3)
    };
    let g = gt(0, bl, 1) * gt(1, bl, 2) - gt(1, bl, 1) * gt(0, bl, 2);
    let scale = (gt(0, bl, 1) * gt(1, bl, 2)).abs().max((gt(1, bl, 1) * gt(0, bl, 2)).abs());
    if g.abs() < 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularLinearSystem { pivot: g });
    }
    let d1 = gt(1, bl, 2) / g;
    let d2 = -gt(0, bl, 2) / g;
    Ok([d1, d2, c[0] * d1 + c[1] * d2, -(c[0] + 1.0) * d1 - (c[1] + 1.0) * d2])
}

/// Largest positive-drift barrier candidates for starts: a*_i at θ_i and r_i.
fn anchor_starts(model: &RegimeModel) -> Result<Vec<[f64; 2]>> {
    let s = model.states();
    let at = |i: usize, q: f64| single_regime_barrier(s[i].mu, s[i].sigma, q);
    let theta = [at(0, model.theta(0))?, at(1, model.theta(1))?];
    let disc = [at(0, s[0].discount)?, at(1, s[1].discount)?];
    let upper = apriori_bounds(model)?.upper.barrier;
    let mid = [0.5 * (theta[0] + disc[0]), 0.5 * (theta[1] + disc[1])];
    Ok(vec![theta, disc, mid, [upper, upper * 1.01]])
}

pub fn solve_positive(model: &RegimeModel, tol: f64) -> Result<PositiveCaseSolution> {
    for (i, s) in model.states().iter().enumerate() {
        if !(s.mu > 0.0) {
            return Err(Error::DriftHypothesisViolated { state: i, mu: s.mu });
        }
    }
    let setup = PositiveSetup::new(model)?;
    solve_barrier_system(&setup, tol, true)
}

/// The same smooth-fit barrier system without the drift-sign precondition.
/// Concavity is not required of the result since it need not hold once a
/// drift is negative; V′ ≥ 1 still is.
pub fn solve_barrier_pair(model: &RegimeModel, tol: f64) -> Result<PositiveCaseSolution> {
    let setup = PositiveSetup::new(model)?;
    solve_barrier_system(&setup, tol, false)
}

fn solve_barrier_system(
    setup: &PositiveSetup<'_>,
    tol: f64,
    require_concave: bool,
) -> Result<PositiveCaseSolution> {
    let model = setup.model;
    let opts = NewtonOptions {
        tol,
        ..NewtonOptions::default()
    };
    let anchors = match anchor_starts(model) {
        Ok(a) => a,
        Err(_) => {
            // Some drift is non-positive: anchor on the positive regimes.
            let s = model.states();
            let a: Vec<f64> = (0..2)
                .filter(|&i| s[i].mu > 0.0)
                .map(|i| single_regime_barrier(s[i].mu, s[i].sigma, model.theta(i)))
                .collect::<Result<_>>()?;
            let base = a.first().copied().unwrap_or(1.0);
            vec![[base, base], [base * 0.9, base], [base, base * 0.9]]
        }
    };
    let mut starts = anchors.clone();
    starts.extend(jittered_starts(&anchors[0], 8));

    let mut found: Vec<(usize, [f64; 2], usize)> = Vec::new();
    let mut singular = 0usize;
    let mut attempts = 0usize;
    let mut notes = Vec::new();
    for lo in [0usize, 1] {
        for s in &starts {
            let mut x0 = [s[lo], s[1 - lo]];
            if x0[0] > x0[1] {
                x0.swap(0, 1);
            }
            attempts += 1;
            let f = |x: &[f64; 2]| setup.state(lo, x[0], x[1]).map(|st| st.residual);
            match damped_newton(f, x0, &opts) {
                Ok(out) => found.push((lo, out.x, out.iterations)),
                Err(Error::SingularLinearSystem { .. }) => singular += 1,
                Err(_) => {}
            }
        }
    }
    let mut best: Option<(f64, PositiveCaseSolution)> = None;
    for (lo, x, iterations) in distinct_candidates(found) {
        let (bl, bh) = (x[0], x[1]);
        let label = if lo == 0 { "b0 < b1" } else { "b1 < b0" };
        if bl > bh + 1e-9 {
            notes.push(format!("labeling {label}: root ({bl:.6}, {bh:.6}) has the wrong order"));
            continue;
        }
        let st = match setup.state(lo, bl, bh.max(bl)) {
            Ok(st) => st,
            Err(e) => {
                notes.push(format!("labeling {label}: {e}"));
                continue;
            }
        };
        let sol = setup.build(
            &st,
            NewtonSummary {
                iterations,
                starts: attempts,
                candidates: 0,
                condition_estimate: 0.0,
            },
        );
        if let Err(why) = shape_check(&sol.value, bh.max(bl), require_concave) {
            notes.push(format!("labeling {label}: root ({bl:.6}, {bh:.6}) rejected, {why}"));
            continue;
        }
        let probe = 0.5 * bl;
        let score = sol.evaluate(probe, 0) + sol.evaluate(probe, 1);
        let better = match &best {
            None => true,
            // Prefer b0 < b1 when both labelings give the same function.
            Some((s, _)) => score > s + 1e-9,
        };
        if better {
            best = Some((score, sol));
        }
    }
    match best {
        Some((_, mut sol)) => {
            sol.newton.candidates = notes.len() + 1;
            Ok(sol)
        }
        None if singular == attempts => Err(Error::SingularLinearSystem { pivot: 0.0 }),
        None => {
            if notes.is_empty() {
                notes.push("no start converged".into());
            }
            Err(Error::OrderingUnresolved(notes.join("; ")))
        }
    }
}

/// V(0) = 0, V′ ≥ 1 and optionally V″ ≤ 0 on a sample of [0, top].
pub(crate) fn shape_check(
    value: &[Piecewise; 2],
    top: f64,
    require_concave: bool,
) -> std::result::Result<(), String> {
    const N: usize = 400;
    for (i, v) in value.iter().enumerate() {
        if v.value(0.0).abs() > 1e-8 {
            return Err(format!("V_{i}(0) = {:.3e}", v.value(0.0)));
        }
        for k in 0..=N {
            let x = top * k as f64 / N as f64;
            let d1 = v.derivative(x, 1);
            let d2 = v.derivative(x, 2);
            if !(d1 >= 1.0 - 1e-7) {
                return Err(format!("V_{i}'({x:.4}) = {d1:.6} < 1"));
            }
            if require_concave && !(d2 <= 1e-7) {
                return Err(format!("V_{i}''({x:.4}) = {d2:.3e} > 0"));
            }
        }
    }
    Ok(())
}
