use thiserror::Error;

use crate::sampler::PairKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid dimension {0}: states need d >= 2")]
    InvalidDimension(usize),

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("ensemble states {i} and {j} coincide (fidelity {fidelity})")]
    DuplicateStates { i: usize, j: usize, fidelity: f64 },

    #[error("could not draw a distinct state after {attempts} attempts")]
    DistinctnessExhausted { attempts: usize },

    #[error("fidelity table entry ({i}, {j}) = {value} is not below 1/N = {bound}")]
    FidelityBound { i: usize, j: usize, value: f64, bound: f64 },

    #[error("moment operator side {side} exceeds cap {cap}")]
    MomentCapExceeded { side: usize, cap: usize },

    #[error("marginal masses differ: {supply} vs {demand}")]
    MarginalMismatch { supply: f64, demand: f64 },

    #[error("cost matrix contains a non-finite entry at ({i}, {j})")]
    NonFiniteCost { i: usize, j: usize },

    #[error("transport solver did not converge within {0} pivots")]
    PivotLimit(usize),

    #[error("insufficient collisions: no label of kind {kind} has at least {k} samples")]
    InsufficientCollisions { kind: PairKind, k: u32 },

    #[error("coverage incomplete: {missing} of {labels} labels unobserved")]
    CoverageIncomplete {
        missing: usize,
        labels: usize,
        first_missing: Vec<(usize, usize)>,
    },

    #[error("empty batch for kind {0}")]
    EmptyBatch(PairKind),

    #[error("ensembles are not computational-basis ensembles (fidelity {value} at ({i}, {j}))")]
    NonBasisOracle { i: usize, j: usize, value: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse grouping used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Estimator,
    NumericCap,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InsufficientCollisions { .. }
            | Error::CoverageIncomplete { .. }
            | Error::EmptyBatch(_)
            | Error::NonBasisOracle { .. } => ErrorClass::Estimator,
            Error::MomentCapExceeded { .. } | Error::PivotLimit(_) => ErrorClass::NumericCap,
            _ => ErrorClass::Usage,
        }
    }

    /// True when an estimator could not produce a value from the data it was given.
    pub fn is_undefined_estimate(&self) -> bool {
        self.class() == ErrorClass::Estimator
    }
}
