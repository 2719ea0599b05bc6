//! Monte Carlo estimates of a policy's value at chosen starting points.

use serde::Serialize;

use regime_dividends::format::sig9;
use regime_dividends::montecarlo::{simulate_policy, SimConfig, SimEstimate};
use regime_dividends::{BarrierPolicy, RegimeModel, Result};

#[derive(Debug, Clone, Serialize)]
pub struct PointEstimate {
    #[serde(with = "sig9")]
    pub x0: f64,
    pub regime: usize,
    pub estimate: SimEstimate,
}

/// Estimates V at every `(x0, regime)` pair with the same configuration.
pub fn estimate_points(
    model: &RegimeModel,
    policy: &BarrierPolicy,
    points: &[(f64, usize)],
    cfg: &SimConfig,
) -> Result<Vec<PointEstimate>> {
    policy.check_for(model.len())?;
    points
        .iter()
        .map(|&(x0, regime)| {
            Ok(PointEstimate {
                x0,
                regime,
                estimate: simulate_policy(model, policy, x0, regime, cfg)?,
            })
        })
        .collect()
}
