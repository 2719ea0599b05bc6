//! Pass/fail checks on a solved (or supplied) policy.

use serde::Serialize;

use regime_dividends::fixedpoint::{self, hjb_residual, GridFunction, Operator};
use regime_dividends::format::sig9;
use regime_dividends::montecarlo::{simulate_policy, SimConfig};
use regime_dividends::two_regime::{solve_positive, TwoRegimeSolution};
use regime_dividends::{BarrierPolicy, DriftCase, RegimeModel, Result, ValueFunction};

use crate::solve::{solve_model, Method, SolveOutcome};

pub const HJB_TOL: f64 = 5e-3;
/// Smooth-fit tolerance on exact (closed-form) derivatives.
pub const SMOOTH_FIT_TOL: f64 = 1e-6;
/// Smooth-fit tolerance on the grid value of T″ at the barrier.
pub const GRID_SMOOTH_FIT_TOL: f64 = 1e-4;
/// Largest admissible second difference / h² for a concave grid function.
pub const CONCAVITY_TOL: f64 = 1e-6;
/// V″ above this counts as evidence of non-concavity.
pub const NON_CONCAVITY_MIN: f64 = 1e-4;
pub const CROSS_VALUE_TOL: f64 = 1e-3;
pub const MC_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(with = "sig9")]
    pub value: f64,
    #[serde(with = "sig9")]
    pub bound: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, bound: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: value <= bound,
            value,
            bound,
            detail,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: value >= bound,
            value,
            bound,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub case: DriftCase,
    pub method: Method,
    pub policy: BarrierPolicy,
    pub supplied_policy: bool,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub h: f64,
    pub tol: f64,
    pub sim: SimConfig,
    /// Reserve levels for the simulation check; default spreads five points
    /// below the largest barrier.
    pub probe_points: Option<Vec<f64>>,
    pub policy: Option<BarrierPolicy>,
}

/// Values to check: either the solver output or V^b of a supplied policy.
struct Subject<'a> {
    policy: BarrierPolicy,
    grid: GridFunction,
    closed: Option<&'a TwoRegimeSolution>,
}

impl ValueFunction for Subject<'_> {
    fn value(&self, x: f64, regime: usize) -> f64 {
        match self.closed {
            Some(c) => c.evaluate(x, regime),
            None => self.grid.eval(x, regime),
        }
    }
}

pub fn verify(model: &RegimeModel, opts: &VerifyOptions) -> Result<VerifyReport> {
    let outcome = solve_model(model, opts.h, opts.tol)?;
    let supplied = opts.policy.is_some();
    let subject = match &opts.policy {
        Some(p) => {
            p.check_for(model.len())?;
            Subject {
                policy: p.clone(),
                grid: fixedpoint::barrier_value(p, model, opts.h, 1e-10)?,
                closed: None,
            }
        }
        None => Subject {
            policy: outcome.policy.clone(),
            grid: outcome.value.clone(),
            closed: outcome.closed_form.as_ref(),
        },
    };

    let mut checks = vec![hjb_check(model, &subject.grid)];
    checks.extend(shape_checks(model, &outcome, &subject));
    checks.extend(smooth_fit_checks(model, &subject)?);
    if !supplied {
        checks.extend(cross_solver_check(model, &outcome, opts)?);
    }
    checks.extend(simulation_checks(model, &subject, opts)?);
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        case: outcome.case,
        method: outcome.method,
        policy: subject.policy,
        supplied_policy: supplied,
        checks,
        pass,
    })
}

fn hjb_check(model: &RegimeModel, v: &GridFunction) -> Check {
    let r = hjb_residual(v, model);
    Check::at_most(
        "hjb_residual",
        r.sup_norm(),
        HJB_TOL,
        format!(
            "max generator {:.3e}, max 1 - V' {:.3e}",
            r.max_generator(),
            r.max_gradient_gap()
        ),
    )
}

fn shape_checks(model: &RegimeModel, outcome: &SolveOutcome, s: &Subject) -> Vec<Check> {
    let h = s.grid.grid().step;
    let n = model.len();
    let mut out = Vec::new();
    let min_slope = (0..n)
        .flat_map(|i| (0..s.grid.grid().len).map(move |k| (i, k)))
        .map(|(i, k)| s.grid.node_derivative(i, k))
        .fold(f64::INFINITY, f64::min);
    out.push(Check::at_least(
        "slope_at_least_one",
        min_slope,
        1.0 - 1e-3,
        "min finite-difference V' over the grid".into(),
    ));
    let curv: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (d, x) = s.grid.max_second_difference(i);
            (d / (h * h), x)
        })
        .collect();
    match outcome.case {
        DriftCase::MixedSign => {
            // Only the negative-drift regime is expected to lose concavity.
            let neg = (0..n)
                .find(|&i| model.state(i).mu < 0.0)
                .unwrap_or(0);
            let (d, x) = curv[neg];
            out.push(Check::at_least(
                "non_concavity_expected",
                d,
                NON_CONCAVITY_MIN,
                format!("regime {neg}: largest V'' at x = {x:.4}"),
            ));
        }
        _ => {
            let (i, &(d, x)) = curv
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                .expect("at least one regime");
            out.push(Check::at_most(
                "concavity",
                d,
                CONCAVITY_TOL,
                format!("regime {i}: largest V'' at x = {x:.4}"),
            ));
        }
    }
    out
}

fn smooth_fit_checks(model: &RegimeModel, s: &Subject) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    if let Some(closed) = s.closed {
        let v = closed.value_functions();
        let mut worst: f64 = 0.0;
        let mut detail = Vec::new();
        for (i, &b) in s.policy.barriers.iter().enumerate() {
            if b <= 0.0 {
                continue;
            }
            let x = b * (1.0 - 1e-12);
            let d1 = v[i].derivative(x, 1) - 1.0;
            let d2 = v[i].derivative(x, 2);
            worst = worst.max(d1.abs()).max(d2.abs());
            detail.push(format!("regime {i}: V'-1 = {d1:.2e}, V'' = {d2:.2e}"));
            let d = s.policy.liquidation_level(i);
            if d > 0.0 {
                let g = v[i].derivative(d * (1.0 + 1e-12), 1) - 1.0;
                worst = worst.max(g.abs());
                detail.push(format!("regime {i}: V'(d)-1 = {g:.2e}"));
            }
        }
        out.push(Check::at_most("smooth_fit", worst, SMOOTH_FIT_TOL, detail.join("; ")));
    } else if s.policy.barriers.iter().any(|&b| b > 0.0) {
        let op = Operator::new(model, s.grid.grid())?;
        let defect = op.smooth_fit_defect(&s.grid, &s.policy)?;
        let worst = s
            .policy
            .barriers
            .iter()
            .zip(&defect)
            .filter(|(b, _)| **b > 0.0)
            .map(|(_, d)| d.abs())
            .fold(0.0, f64::max);
        out.push(Check::at_most(
            "smooth_fit",
            worst,
            GRID_SMOOTH_FIT_TOL,
            format!(
                "V''(b-) per regime: [{}]",
                defect.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    Ok(out)
}

fn cross_solver_check(
    model: &RegimeModel,
    outcome: &SolveOutcome,
    opts: &VerifyOptions,
) -> Result<Vec<Check>> {
    if outcome.method != Method::FixedPoint || model.len() != 2 {
        return Ok(Vec::new());
    }
    let closed = solve_positive(model, 1e-10)?;
    let fp = &outcome.value;
    let top = closed.barriers[0].max(closed.barriers[1]);
    let grid = fp.grid();
    let mut sup: f64 = 0.0;
    for k in 0..grid.len {
        let x = grid.x(k);
        if x > top {
            break;
        }
        for i in 0..2 {
            sup = sup.max((fp.eval(x, i) - closed.evaluate(x, i)).abs());
        }
    }
    let db = (0..2)
        .map(|i| (outcome.policy.barrier(i) - closed.barriers[i]).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::at_most(
            "cross_solver_value",
            sup,
            CROSS_VALUE_TOL,
            "sup |fixed point - closed form| on [0, max b*]".into(),
        ),
        Check::at_most(
            "cross_solver_barriers",
            db,
            (2.0 * opts.h).max(2e-3),
            format!("closed-form barriers {:?}", closed.barriers),
        ),
    ])
}

fn default_probes(policy: &BarrierPolicy) -> Vec<f64> {
    let top = policy.barriers.iter().copied().fold(0.0, f64::max).max(0.5);
    [0.1, 0.3, 0.5, 0.75, 1.0].iter().map(|f| f * top).collect()
}

fn simulation_checks(
    model: &RegimeModel,
    s: &Subject,
    opts: &VerifyOptions,
) -> Result<Vec<Check>> {
    let probes = opts
        .probe_points
        .clone()
        .unwrap_or_else(|| default_probes(&s.policy));
    let mut out = Vec::new();
    for (k, &x) in probes.iter().enumerate() {
        // Alternate the starting regime across probe points.
        let i = k % model.len();
        let est = simulate_policy(model, &s.policy, x, i, &opts.sim)?;
        let v = s.value(x, i);
        let z = if est.stderr > 0.0 {
            (est.mean - v).abs() / est.stderr
        } else if (est.mean - v).abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        out.push(Check::at_most(
            format!("simulation_x{}_regime{i}", regime_dividends::format::fmt_sig(x)),
            z,
            MC_SIGMAS,
            format!(
                "estimate {:.6} ± {:.2e} vs V = {v:.6}",
                est.mean, est.stderr
            ),
        ));
    }
    Ok(out)
}
