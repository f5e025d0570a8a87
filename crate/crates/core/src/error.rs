use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("invalid degree distribution: {0}")]
    DegreeDistribution(String),

    #[error("degenerate ensemble: design rate {0} is not in (0, 1)")]
    DegenerateRate(f64),

    #[error("invalid system definition: {0}")]
    InvalidSystem(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("update left the unit cube at component {component} (value {value})")]
    LeftUnitCube { component: usize, value: f64 },

    #[error("iterate {iteration} broke monotonicity at component {component} by {excess:e}")]
    NonMonotone {
        iteration: usize,
        component: usize,
        excess: f64,
    },

    #[error("state is not a fixed point for any parameter in [0, 1]")]
    NotAFixedPoint,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid coupling geometry: {0}")]
    Coupling(String),

    #[error("no positive energy gap at epsilon = {epsilon} (gap {gap})")]
    NoPositiveGap { epsilon: f64, gap: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
