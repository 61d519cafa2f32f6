use thiserror::Error;

/// Errors raised by network validation, the dynamical maps and the solvers.
///
/// Indices carried by variants are zero-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NonSquare { rows: usize, row: usize, len: usize },

    #[error("network needs at least 2 individuals, got {0}")]
    TooSmall(usize),

    #[error("declared size n = {declared} does not match data of size {actual}")]
    SizeMismatch { declared: usize, actual: usize },

    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("negative entry at ({0}, {1})")]
    NegativeEntry(usize, usize),

    #[error("nonzero diagonal entry at ({0}, {0})")]
    NonzeroDiagonal(usize),

    #[error("row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("susceptibility theta[{index}] = {value} is outside [0, 1]")]
    SusceptibilityOutOfRange { index: usize, value: f64 },

    #[error("vector is not on the simplex: {0}")]
    NotOnSimplex(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("stubbornness profile violates the standing assumption: {0}")]
    AssumptionViolated(String),

    #[error("linear system is singular: {0}")]
    SingularSystem(&'static str),

    #[error("row {row} of the control matrix sums to {sum}")]
    RowStochasticityViolation { row: usize, sum: f64 },

    #[error("iteration did not converge in {iterations} steps (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },

    #[error("influence graph is not a star")]
    NotStar,

    #[error("star center {0} is not fully stubborn")]
    CenterNotFullyStubborn(usize),

    #[error("star center {0} is fully stubborn")]
    CenterFullyStubborn(usize),

    #[error("center {center} places weight {weight} on partially stubborn leaf {leaf}")]
    PreconditionCliNonzero { center: usize, leaf: usize, weight: f64 },

    #[error("equilibrium residual {0:e} is too large for property checks")]
    StaleEquilibrium(f64),

    #[error("trajectory tail has {0} usable points, need at least {1}")]
    InsufficientTail(usize, usize),

    #[error("parameter {name} = {value} out of range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
