use serde::Serialize;

use super::grid::GridFunction;
use crate::model::RegimeModel;

/// Both branches of the variational inequality at the interior grid nodes
/// of one regime.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeResidual {
    pub x: Vec<f64>,
    /// ½σ²V″ + μV′ − rV + Σ_j q_ij (V_j − V_i)
    pub generator: Vec<f64>,
    /// 1 − V′
    pub gradient_gap: Vec<f64>,
}

impl RegimeResidual {
    pub fn residual(&self) -> impl Iterator<Item = f64> + '_ {
        self.generator
            .iter()
            .zip(&self.gradient_gap)
            .map(|(g, d)| g.max(*d))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HjbResidual {
    pub regimes: Vec<RegimeResidual>,
}

impl HjbResidual {
    /// sup |max{generator, 1 − V′}|.
    pub fn sup_norm(&self) -> f64 {
        self.regimes
            .iter()
            .flat_map(|r| r.residual())
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    pub fn max_generator(&self) -> f64 {
        self.regimes
            .iter()
            .flat_map(|r| r.generator.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_gradient_gap(&self) -> f64 {
        self.regimes
            .iter()
            .flat_map(|r| r.gradient_gap.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Central finite-difference evaluation of max{(L − r)V + QV, 1 − V′}.
pub fn hjb_residual(v: &GridFunction, model: &RegimeModel) -> HjbResidual {
    let grid = v.grid();
    let h = grid.step;
    let n = model.len();
    let regimes = (0..n)
        .map(|i| {
            let s = model.state(i);
            let vi = v.samples(i);
            let mut out = RegimeResidual {
                x: Vec::with_capacity(grid.len),
                generator: Vec::with_capacity(grid.len),
                gradient_gap: Vec::with_capacity(grid.len),
            };
            for k in 1..grid.len - 1 {
                let d1 = (vi[k + 1] - vi[k - 1]) / (2.0 * h);
                let d2 = (vi[k + 1] - 2.0 * vi[k] + vi[k - 1]) / (h * h);
                let coupling: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| model.rate(i, j) * (v.samples(j)[k] - vi[k]))
                    .sum();
                out.x.push(grid.x(k));
                out.generator.push(
                    0.5 * s.sigma * s.sigma * d2 + s.mu * d1 - s.discount * vi[k] + coupling,
                );
                out.gradient_gap.push(1.0 - d1);
            }
            out
        })
        .collect();
    HjbResidual { regimes }
}
