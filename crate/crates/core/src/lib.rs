//! Optimal dividend policies for a firm whose reserves follow a
//! Markov-modulated Brownian motion.
//!
//! * [`model`]: the regime-switching model and its validation.
//! * [`analytics`]: single-regime closed forms and a-priori bounds.
//! * [`fixedpoint`]: the general N-regime contraction iteration.
//! * [`two_regime`]: closed-form solutions for two regimes.
//! * [`montecarlo`]: path simulation used as an independent oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytics;
pub mod error;
pub mod fixedpoint;
pub mod format;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod policy;
pub mod two_regime;

pub use error::{Error, Result};
pub use model::{DriftCase, RegimeModel, RegimeParams};
pub use policy::{BarrierPolicy, ValueFunction};
