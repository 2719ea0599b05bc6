//! Case dispatch shared by `solve` and `verify`.

use serde::Serialize;

use regime_dividends::fixedpoint::{self, Grid, GridFunction, IterationReport, SolveOptions};
use regime_dividends::two_regime::{
    liquidate_everywhere_candidate, liquidation_levels, solve_barrier_pair, solve_negative, LiquidationDiagnostic,
    TwoRegimeSolution,
};
use regime_dividends::{BarrierPolicy, DriftCase, Error, RegimeModel, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FixedPoint,
    ClosedFormMixed,
    /// Mixed signs without an admissible liquidation band: the barrier
    /// smooth-fit system solved without the drift hypothesis.
    ClosedFormBarrierPair,
    /// Immediate liquidation is optimal at every level in the negative-drift
    /// regime; the other regime pays at its own barrier.
    LiquidateEverywhere,
    /// Every drift non-positive: pay everything at once.
    ImmediatePayout,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutcome {
    pub case: DriftCase,
    pub method: Method,
    pub policy: BarrierPolicy,
    #[serde(skip)]
    pub value: GridFunction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<TwoRegimeSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<IterationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_levels: Option<LiquidationDiagnostic>,
    pub notes: Vec<String>,
}

/// Grid cap for sampling closed forms: well past every barrier.
fn sample_cap(policy: &BarrierPolicy) -> f64 {
    let top = policy.barriers.iter().copied().fold(0.0, f64::max);
    (1.5 * top).max(top + 0.5)
}

fn liquidate_everywhere(model: &RegimeModel, regime: usize, h: f64) -> Result<SolveOutcome> {
    let cand = liquidate_everywhere_candidate(model, regime)?;
    let mut barriers = vec![cand.barrier; 2];
    barriers[regime] = 0.0;
    let policy = BarrierPolicy::new(barriers);
    let grid = Grid::covering(h, sample_cap(&policy))?;
    let value = GridFunction::from_fn(grid, &policy.barriers, |x, i| cand.value[i].value(x))?;
    let critical = liquidation_levels(model, &cand, grid.cap());
    Ok(SolveOutcome {
        case: DriftCase::MixedSign,
        method: Method::LiquidateEverywhere,
        policy,
        value,
        closed_form: None,
        report: None,
        critical_levels: Some(critical),
        notes: vec![format!("regime {regime}: immediate liquidation is optimal at every level")],
    })
}

pub fn solve_model(model: &RegimeModel, h: f64, tol: f64) -> Result<SolveOutcome> {
    let case = model.drift_sign_case();
    match case {
        DriftCase::AllPositive => {
            let sol = fixedpoint::solve_with(
                model,
                &SolveOptions {
                    h,
                    tol,
                    ..SolveOptions::default()
                },
            )?;
            Ok(SolveOutcome {
                case,
                method: Method::FixedPoint,
                policy: sol.barriers,
                value: sol.value,
                closed_form: None,
                report: Some(sol.report),
                critical_levels: None,
                notes: Vec::new(),
            })
        }
        DriftCase::MixedSign if model.len() == 2 => {
            let mut notes = Vec::new();
            let (method, closed) = match solve_negative(model, 1e-10) {
                Ok(s) => (Method::ClosedFormMixed, TwoRegimeSolution::Mixed(s)),
                Err(Error::LiquidateEverywhere { regime }) => {
                    return liquidate_everywhere(model, regime, h);
                }
                Err(e) => {
                    notes.push(format!("liquidation system: {e}"));
                    let s = solve_barrier_pair(model, 1e-10)?;
                    (Method::ClosedFormBarrierPair, TwoRegimeSolution::Positive(s))
                }
            };
            let policy = closed.policy();
            let value = closed.to_grid(h, sample_cap(&policy))?;
            let critical = liquidation_levels(model, &closed, value.grid().cap());
            Ok(SolveOutcome {
                case,
                method,
                policy,
                value,
                closed_form: Some(closed),
                report: None,
                critical_levels: Some(critical),
                notes,
            })
        }
        DriftCase::MixedSign => Err(Error::UnsupportedCase(format!(
            "mixed drift signs need exactly two regimes, got {}",
            model.len()
        ))),
        DriftCase::AllNonPositive => {
            let policy = BarrierPolicy::new(vec![0.0; model.len()]);
            let grid = Grid::covering(h, 1.0)?;
            let value = GridFunction::from_fn(grid, &policy.barriers, |x, _| x)?;
            Ok(SolveOutcome {
                case,
                method: Method::ImmediatePayout,
                policy,
                value,
                closed_form: None,
                report: None,
                critical_levels: None,
                notes: vec!["no regime has positive drift; V(x) = x".into()],
            })
        }
    }
}
