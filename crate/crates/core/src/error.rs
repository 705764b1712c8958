use thiserror::Error;

/// Errors raised by the inference and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet mismatch: expected {expected} symbols, got {actual}")]
    AlphabetMismatch { expected: usize, actual: usize },

    #[error("absolute continuity violated at index {index}: p > 0 where q = 0")]
    AbsoluteContinuityViolation { index: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty sample")]
    EmptySample,

    #[error("index {index} out of range for alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("infeasible constraint: target {target} outside attainable range [{lo}, {hi}]")]
    InfeasibleConstraint { target: f64, lo: f64, hi: f64 },

    #[error("degenerate potential: constant value {value} on support cannot reach target {target}")]
    DegeneratePotential { value: f64, target: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("type class table too large: {size} entries exceeds limit {limit}")]
    TableTooLarge { size: u128, limit: u128 },

    #[error("empty event: no type class of size n = {n} satisfies the constraint")]
    EmptyEvent { n: usize },

    #[error("unsupported divergence generator: {0}")]
    UnsupportedGenerator(String),

    #[error("empty preimage for image value {0}")]
    EmptyPreimage(f64),

    #[error("unsupported loss: {0}")]
    UnsupportedLoss(String),

    #[error("quadrature grid too coarse: relative error {relative_error:e} of the second moment")]
    GridTooCoarse { relative_error: f64 },

    #[error("no model grid point satisfies the expected-loss window")]
    EmptyFeasibleSet,

    #[error("fixed-point iteration diverged after {iterations} iterations (mean shift {shift:e})")]
    FixedPointDivergence { iterations: usize, shift: f64 },

    #[error("insufficient hits at n = {n}: {hits} hits")]
    InsufficientHits { n: usize, hits: u64 },

    #[error("config invalid: {0}")]
    ConfigInvalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse classification of errors, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorFamily {
    Validation,
    Infeasible,
    Numerical,
    Resource,
}

impl ErrorFamily {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorFamily::Validation => 2,
            ErrorFamily::Infeasible => 3,
            ErrorFamily::Numerical => 4,
            ErrorFamily::Resource => 5,
        }
    }
}

impl Error {
    pub fn family(&self) -> ErrorFamily {
        use Error::*;
        match self {
            AlphabetMismatch { .. }
            | AbsoluteContinuityViolation { .. }
            | InvalidDistribution(_)
            | InvalidInput(_)
            | EmptySample
            | IndexOutOfRange { .. }
            | UnsupportedGenerator(_)
            | UnsupportedLoss(_)
            | ConfigInvalid(_) => ErrorFamily::Validation,
            InfeasibleConstraint { .. }
            | DegeneratePotential { .. }
            | EmptyEvent { .. }
            | EmptyPreimage(_)
            | EmptyFeasibleSet
            | InsufficientHits { .. } => ErrorFamily::Infeasible,
            NonConvergence { .. } | GridTooCoarse { .. } | FixedPointDivergence { .. } => {
                ErrorFamily::Numerical
            }
            TableTooLarge { .. } | Io(_) => ErrorFamily::Resource,
        }
    }
}

impl Error {
    /// The variant name, stable across releases.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            AlphabetMismatch { .. } => "AlphabetMismatch",
            AbsoluteContinuityViolation { .. } => "AbsoluteContinuityViolation",
            InvalidDistribution(_) => "InvalidDistribution",
            InvalidInput(_) => "InvalidInput",
            EmptySample => "EmptySample",
            IndexOutOfRange { .. } => "IndexOutOfRange",
            InfeasibleConstraint { .. } => "InfeasibleConstraint",
            DegeneratePotential { .. } => "DegeneratePotential",
            NonConvergence { .. } => "NonConvergence",
            TableTooLarge { .. } => "TableTooLarge",
            EmptyEvent { .. } => "EmptyEvent",
            UnsupportedGenerator(_) => "UnsupportedGenerator",
            EmptyPreimage(_) => "EmptyPreimage",
            UnsupportedLoss(_) => "UnsupportedLoss",
            GridTooCoarse { .. } => "GridTooCoarse",
            EmptyFeasibleSet => "EmptyFeasibleSet",
            FixedPointDivergence { .. } => "FixedPointDivergence",
            InsufficientHits { .. } => "InsufficientHits",
            ConfigInvalid(_) => "ConfigInvalid",
            Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
