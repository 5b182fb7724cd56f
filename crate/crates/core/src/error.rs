//! Error type shared by every numerical routine in the crate.
//!
//! The split between variants mirrors how callers are expected to react:
//! precondition violations (`BadMeasure`, `BadExponent`, `NegativeEntry`, …)
//! mean the *input* was malformed and no amount of iteration budget will help,
//! while [`CalcError::NonConvergence`] means a well-posed optimization ran out
//! of budget and the reported best value should be treated as an estimate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CalcError>;

/// Everything that can go wrong while evaluating norms, factorizations, or
/// experiment drivers.
#[derive(Debug, Clone, thiserror::Error)]
pub enum CalcError {
    /// A measure space needs at least one atom.
    #[error("measure space must contain at least one atom")]
    EmptySpace,

    /// Atom weights must be strictly positive finite reals.
    #[error("measure weight at atom {index} must be positive and finite, got {value}")]
    BadMeasure { index: usize, value: f64 },

    /// Two vectors (or a vector and a weight table) disagree in length.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// Two arguments live over different measure spaces.
    #[error("arguments live over different measure spaces")]
    SpaceMismatch,

    /// Lebesgue exponents live in [1, ∞].
    #[error("exponent must lie in [1, ∞], got {0}")]
    BadExponent(f64),

    /// Norm weights must be strictly positive finite reals.
    #[error("norm weight at atom {index} must be positive and finite, got {value}")]
    BadWeight { index: usize, value: f64 },

    /// An interpolation or combination parameter left its admissible range.
    #[error("parameter {name} must lie in {range}, got {value}")]
    BadParameter {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    /// A vector entry was NaN or infinite.
    #[error("non-finite entry at atom {index}")]
    NonFiniteEntry { index: usize },

    /// An operation required a nonnegative real vector.
    #[error("entry at atom {index} must be nonnegative real, got {value}")]
    NegativeEntry { index: usize, value: String },

    /// An operation required a nonzero input.
    #[error("input vector must be nonzero for {op}")]
    ZeroInput { op: &'static str },

    /// An iterative routine exhausted its budget before reaching tolerance.
    #[error("{op} failed to converge within {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// The shrinking schedule of a splitting run was exhausted without an
    /// acceptable scale.
    #[error("splitting schedule exhausted: {0}")]
    ScheduleExhausted(String),

    /// Structural infeasibility (e.g. a derivative target not representable
    /// by any admissible family).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Circle grids must have power-of-two size for the FFT fast path.
    #[error("grid size must be a power of two ≥ 4, got {0}")]
    BadGridSize(usize),
}
