use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Every variant carries enough context to be reported as a machine-readable
/// code (see [`Error::code`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-Hermitian: |A^† + A| = {defect:.3e} exceeds {tol:.3e}")]
    NotSkewHermitian { defect: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("eigenprojector labels lost at t = {t}: best overlap {overlap:.3} for block {block} (multiplicity {multiplicity})")]
    CrossingDetected {
        t: f64,
        block: usize,
        overlap: f64,
        multiplicity: usize,
    },

    #[error("block {block} is singular: smallest singular value {sv:.3e} below {tol:.3e}")]
    SingularBlock { block: usize, sv: f64, tol: f64 },

    #[error("integrator failure at t = {t}: {reason}")]
    IntegratorFailure { t: f64, reason: String },

    #[error("wave operator blew up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("ambiguous eigenvalue clustering: {0}")]
    AmbiguousClustering(String),

    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("bad initial condition: {0}")]
    BadInitialCondition(String),

    #[error("bound violated at t = {t}: {lhs:.6e} > {bound:.6e} ({what})")]
    BoundViolated {
        t: f64,
        lhs: f64,
        bound: f64,
        what: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    /// Attaches a time stamp to errors that carry one.
    pub fn at_time(self, time: f64) -> Self {
        match self {
            Error::CrossingDetected {
                block,
                overlap,
                multiplicity,
                ..
            } => Error::CrossingDetected {
                t: time,
                block,
                overlap,
                multiplicity,
            },
            other => other,
        }
    }

    /// Attaches a block index to [`Error::SingularBlock`].
    pub fn for_block(self, k: usize) -> Self {
        match self {
            Error::SingularBlock { sv, tol, .. } => Error::SingularBlock { block: k, sv, tol },
            other => other,
        }
    }

    /// Stable identifier used in run summaries.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSkewHermitian { .. } => "not_skew_hermitian",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite => "non_finite",
            Error::CrossingDetected { .. } => "crossing_detected",
            Error::SingularBlock { .. } => "singular_block",
            Error::IntegratorFailure { .. } => "integrator_failure",
            Error::BlowUp { .. } => "blow_up",
            Error::AmbiguousClustering(_) => "ambiguous_clustering",
            Error::OutOfRange { .. } => "out_of_range",
            Error::BadInitialCondition(_) => "bad_initial_condition",
            Error::BoundViolated { .. } => "bound_violated",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Parse { .. } => "parse_error",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
