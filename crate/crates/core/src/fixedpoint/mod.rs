//! General N-regime solver: grid value functions, the operator T_b, the
//! barrier functional A_i^v and the two-sided monotone iteration.

mod grid;
mod hjb;
mod operator;

pub use grid::{Grid, GridFunction};
pub use hjb::{hjb_residual, HjbResidual, RegimeResidual};
pub use operator::{direct_convolution, recursive_convolution, Operator, CONCAVITY_SLACK};

use serde::Serialize;

use crate::analytics::{apriori_bounds, single_regime_barrier, SingleRegimeSolution};
use crate::error::{Error, Result};
use crate::model::RegimeModel;
use crate::policy::BarrierPolicy;

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_INNER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub h: f64,
    pub tol: f64,
    pub inner_tol: f64,
    pub max_cap_doublings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            h: DEFAULT_STEP,
            tol: DEFAULT_TOL,
            inner_tol: DEFAULT_INNER_TOL,
            max_cap_doublings: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub iterations: usize,
    pub final_gap: f64,
    pub gaps: Vec<f64>,
    pub lower_barriers: Vec<Vec<f64>>,
    pub upper_barriers: Vec<Vec<f64>>,
    pub contraction_estimate: f64,
    pub grid_step: f64,
    pub x_cap: f64,
    pub cap_doublings: usize,
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    pub value: GridFunction,
    pub barriers: BarrierPolicy,
    pub report: IterationReport,
}

/// Iteration budget ceil(ln(tol/gap0)/ln C) plus a fixed margin.
fn iteration_budget(contraction: f64, gap0: f64, tol: f64) -> usize {
    const MARGIN: usize = 100;
    if gap0 <= tol || contraction <= 0.0 {
        return MARGIN;
    }
    let n = ((tol / gap0).ln() / contraction.ln()).ceil();
    if n.is_finite() {
        n as usize + MARGIN
    } else {
        10_000_000
    }
}

/// One application of T_b.
pub fn apply_tb(f: &GridFunction, b: &BarrierPolicy, model: &RegimeModel) -> Result<GridFunction> {
    Operator::new(model, f.grid())?.apply(f, b)
}

/// b^v for a concave, increasing payoff v.
pub fn best_barrier_for_payoff(v: &GridFunction, model: &RegimeModel) -> Result<BarrierPolicy> {
    Operator::new(model, v.grid())?.best_barrier(v)
}

/// Fixed point of T_{d,b} from the given start, to weighted-norm tolerance.
pub fn iterate_to_fixed_point(
    op: &Operator<'_>,
    policy: &BarrierPolicy,
    start: GridFunction,
    tol: f64,
) -> Result<(GridFunction, Vec<f64>)> {
    let c = op.model().contraction_factor();
    let mut f = start;
    let mut gaps = Vec::new();
    let mut budget = usize::MAX;
    loop {
        let next = op.apply(&f, policy)?;
        let gap = next.weighted_distance(&f);
        if gaps.is_empty() {
            budget = iteration_budget(c, gap, tol);
        }
        gaps.push(gap);
        f = next;
        if gap <= tol {
            return Ok((f, gaps));
        }
        if gaps.len() >= budget {
            return Err(Error::NoConvergence {
                what: "barrier value iteration",
                iterations: gaps.len(),
                residual: gap,
            });
        }
    }
}

/// Grid reaching comfortably past every barrier of `policy`.
pub fn grid_for_policy(policy: &BarrierPolicy, h: f64) -> Result<Grid> {
    let top = policy.barriers.iter().copied().fold(0.0, f64::max);
    Grid::covering(h, top.max(h) + 2.0 * h)
}

/// V^b: value of the modulated (liquidation-)barrier strategy, started from 0.
pub fn barrier_value(
    b: &BarrierPolicy,
    model: &RegimeModel,
    h: f64,
    tol: f64,
) -> Result<GridFunction> {
    let grid = grid_for_policy(b, h)?;
    let op = Operator::new(model, grid)?;
    Ok(iterate_to_fixed_point(&op, b, GridFunction::zero(grid, model.len()), tol)?.0)
}

/// The two-sided scheme: v₋ ↑ V and v₊ ↓ V, each step v ← T_{b^v}(v).
pub struct SandwichIteration<'m> {
    op: Operator<'m>,
    lower: GridFunction,
    upper: GridFunction,
    lower_barriers: BarrierPolicy,
    upper_barriers: BarrierPolicy,
}

impl<'m> SandwichIteration<'m> {
    pub fn new(model: &'m RegimeModel, grid: Grid) -> Result<Self> {
        let bounds = apriori_bounds(model)?;
        let n = model.len();
        let sample = |s: &SingleRegimeSolution| {
            GridFunction::from_fn(grid, &vec![s.barrier; n], |x, _| s.value(x))
        };
        Ok(Self {
            op: Operator::new(model, grid)?,
            lower: sample(&bounds.lower)?,
            upper: sample(&bounds.upper)?,
            lower_barriers: BarrierPolicy::new(vec![bounds.lower.barrier; n]),
            upper_barriers: BarrierPolicy::new(vec![bounds.upper.barrier; n]),
        })
    }

    pub fn lower(&self) -> &GridFunction {
        &self.lower
    }

    pub fn upper(&self) -> &GridFunction {
        &self.upper
    }

    pub fn lower_barriers(&self) -> &BarrierPolicy {
        &self.lower_barriers
    }

    pub fn upper_barriers(&self) -> &BarrierPolicy {
        &self.upper_barriers
    }

    pub fn gap(&self) -> f64 {
        self.upper.sup_distance(&self.lower)
    }

    pub fn operator(&self) -> &Operator<'m> {
        &self.op
    }

    pub fn step(&mut self) -> Result<()> {
        let bl = self.op.best_barrier(&self.lower)?;
        let bu = self.op.best_barrier(&self.upper)?;
        self.lower = self.op.apply(&self.lower, &bl)?;
        self.upper = self.op.apply(&self.upper, &bu)?;
        self.lower_barriers = bl;
        self.upper_barriers = bu;
        Ok(())
    }
}

/// Initial grid cap: 1.5 × the larger bound barrier, at least 2·max a*_i(θ_i).
pub fn initial_cap(model: &RegimeModel) -> Result<f64> {
    let bounds = apriori_bounds(model)?;
    let mut floor: f64 = 0.0;
    for (i, s) in model.states().iter().enumerate() {
        floor = floor.max(single_regime_barrier(s.mu, s.sigma, model.theta(i))?);
    }
    Ok((1.5 * bounds.upper.barrier.max(bounds.lower.barrier)).max(2.0 * floor))
}

pub fn solve(model: &RegimeModel, tol: f64) -> Result<FixedPointSolution> {
    solve_with(
        model,
        &SolveOptions {
            tol,
            ..SolveOptions::default()
        },
    )
}

pub fn solve_with(model: &RegimeModel, opts: &SolveOptions) -> Result<FixedPointSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance {} must be positive", opts.tol)));
    }
    let mut cap = initial_cap(model)?;
    let mut doublings = 0;
    loop {
        let grid = Grid::covering(opts.h, cap)?;
        match run_sandwich(model, grid, opts.tol) {
            Err(Error::MaximumAtCap { .. }) if doublings < opts.max_cap_doublings => {
                cap *= 2.0;
                doublings += 1;
            }
            Ok(mut sol) => {
                sol.report.cap_doublings = doublings;
                return Ok(sol);
            }
            Err(e) => return Err(e),
        }
    }
}

fn run_sandwich(model: &RegimeModel, grid: Grid, tol: f64) -> Result<FixedPointSolution> {
    let mut it = SandwichIteration::new(model, grid)?;
    let c = model.contraction_factor();
    let gap0 = it.gap();
    let budget = 2 * iteration_budget(c, gap0, tol);
    let mut gaps = vec![gap0];
    let mut lower_barriers = Vec::new();
    let mut upper_barriers = Vec::new();
    let mut gap = gap0;
    let mut iterations = 0;
    while gap > tol {
        if iterations >= budget {
            return Err(Error::NoConvergence {
                what: "two-sided iteration",
                iterations,
                residual: gap,
            });
        }
        it.step()?;
        iterations += 1;
        gap = it.gap();
        gaps.push(gap);
        lower_barriers.push(it.lower_barriers().barriers.clone());
        upper_barriers.push(it.upper_barriers().barriers.clone());
    }
    let value = it.lower().midpoint(it.upper())?;
    let barriers = if iterations == 0 {
        BarrierPolicy::new(value.barriers().to_vec())
    } else {
        let b = it
            .lower_barriers()
            .barriers
            .iter()
            .zip(&it.upper_barriers().barriers)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        BarrierPolicy::new(b)
    };
    Ok(FixedPointSolution {
        value,
        barriers,
        report: IterationReport {
            iterations,
            final_gap: gap,
            gaps,
            lower_barriers,
            upper_barriers,
            contraction_estimate: c,
            grid_step: grid.step,
            x_cap: grid.cap(),
            cap_doublings: 0,
        },
    })
}
