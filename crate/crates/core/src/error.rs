use thiserror::Error;

/// Every failure mode reported by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("model has no states")]
    EmptyModel,
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("state {state}: field `{field}` is not finite")]
    NonFiniteParameter { state: usize, field: &'static str },
    #[error("state {state}: volatility must be positive, got {value}")]
    NonPositiveVolatility { state: usize, value: f64 },
    #[error("state {state}: discount rate must be positive, got {value}")]
    NonPositiveDiscount { state: usize, value: f64 },
    #[error("generator entry ({row},{col}) must be non-negative, got {value}")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("generator row {row} sums to {sum}, not 0")]
    BadGeneratorRowSum { row: usize, sum: f64 },

    #[error("volatility must be positive, got {sigma}")]
    DegenerateVolatility { sigma: f64 },
    #[error("drift must be positive for the classical barrier formula, got {mu}")]
    NonPositiveDrift { mu: f64 },
    #[error("{what} = {value} lies outside its admissible range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("a-priori bounds need positive drift in every state; state {state} has mu = {mu}")]
    DriftHypothesisViolated { state: usize, mu: f64 },

    #[error("barrier {barrier} of regime {regime} is outside (0, {cap}]")]
    BarrierOutOfRange { regime: usize, barrier: f64, cap: f64 },
    #[error("payoff of regime {regime} is not concave near x = {x} (second difference {second_difference})")]
    NotConcavePayoff {
        regime: usize,
        x: f64,
        second_difference: f64,
    },
    #[error("maximiser of the barrier functional for regime {regime} sits at the grid cap {cap}")]
    MaximumAtCap { regime: usize, cap: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("the model must have exactly 2 states, found {found}")]
    WrongStateCount { found: usize },
    #[error("root isolation failed: {0}")]
    RootIsolationFailure(String),
    #[error("singular linear system (pivot {pivot:e})")]
    SingularLinearSystem { pivot: f64 },
    #[error("no consistent barrier ordering: {0}")]
    OrderingUnresolved(String),
    #[error("regime {regime}: immediate liquidation is optimal at every reserve level")]
    LiquidateEverywhere { regime: usize },
    #[error("unsupported drift configuration: {0}")]
    UnsupportedCase(String),

    #[error("regime {regime}: liquidation level {d} must lie below barrier {b}")]
    InvalidBand { regime: usize, d: f64, b: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
