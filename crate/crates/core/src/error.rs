use alloc::string::String;

/// Errors reported by the equilibrium engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("network is not connected")]
    Disconnected,
    #[error("line {line} has nonpositive susceptance {value}")]
    NonpositiveSusceptance { line: usize, value: f64 },
    #[error("dimension {dim} exceeds the vertex enumeration limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },
    #[error("{count} candidate active sets exceed the enumeration budget {budget}")]
    TooManyActiveSets { count: u128, budget: u128 },
    #[error("feasible set is empty")]
    EmptyPolytope,
    #[error("objective has curvature of the wrong sign at coordinate {0}")]
    WrongCurvature(usize),
    #[error("active-set solver did not terminate after {0} iterations")]
    SolverStalled(usize),
    #[error("profile is infeasible: {0}")]
    InfeasibleProfile(&'static str),
    #[error("{0}")]
    Unsupported(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
