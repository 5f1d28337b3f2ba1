use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the reduction and analysis routines.
#[derive(Debug, Error)]
pub enum MorError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("pencil sE - A is numerically singular at s = {0}")]
    SingularPencil(Complex64),
    #[error("interpolation point {0} is a pole of the full model")]
    SingularShift(Complex64),
    #[error("reduced pencil W^T E V is numerically singular")]
    SingularReducedPencil,
    #[error("E is numerically singular")]
    SingularE,
    #[error("poles are not distinct (relative gap {gap:.3e})")]
    RepeatedPoles { gap: f64 },
    #[error("system is not asymptotically stable (spectral abscissa {abscissa:.6e})")]
    UnstableSystem { abscissa: f64 },
    #[error("nonzero feedthrough term: H2 norm is unbounded")]
    NonzeroFeedthrough,
    #[error("all basis columns were dropped by the rank test")]
    RankCollapse,
    #[error("interpolation data is not closed under conjugation")]
    NotConjugateClosed,
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("interpolation points {0} and {1} coincide")]
    DuplicatePoints(Complex64, Complex64),
    #[error("Loewner pencil is singular at s = {0}")]
    SingularLoewnerPencil(Complex64),
    #[error("transfer function evaluation failed: {0}")]
    EvaluationFailure(String),

    #[error("K(s) is singular at s = {0}")]
    SingularK(Complex64),
    #[error("reduced K_r(s) is singular at s = {0}")]
    SingularReducedK(Complex64),
    #[error("not a single-delay system: {0}")]
    NotADelaySystem(String),

    #[error("pencil sE - A is singular for every s")]
    SingularPencilFamily,
    #[error("Lyapunov/Sylvester solve failed: {0}")]
    LyapunovFailure(String),
    #[error("line search failed after {0} backtracking steps")]
    LineSearchFailure(usize),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

impl MorError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            MorError::DimensionMismatch(_) => "DimensionMismatch",
            MorError::NonFinite(_) => "NonFinite",
            MorError::InvalidInput(_) => "InvalidInput",
            MorError::SingularPencil(_) => "SingularPencil",
            MorError::SingularShift(_) => "SingularShift",
            MorError::SingularReducedPencil => "SingularReducedPencil",
            MorError::SingularE => "SingularE",
            MorError::RepeatedPoles { .. } => "RepeatedPoles",
            MorError::UnstableSystem { .. } => "UnstableSystem",
            MorError::NonzeroFeedthrough => "NonzeroFeedthrough",
            MorError::RankCollapse => "RankCollapse",
            MorError::NotConjugateClosed => "NotConjugateClosed",
            MorError::EigenFailure => "EigenFailure",
            MorError::DuplicatePoints(..) => "DuplicatePoints",
            MorError::SingularLoewnerPencil(_) => "SingularLoewnerPencil",
            MorError::EvaluationFailure(_) => "EvaluationFailure",
            MorError::SingularK(_) => "SingularK",
            MorError::SingularReducedK(_) => "SingularReducedK",
            MorError::NotADelaySystem(_) => "NotADelaySystem",
            MorError::SingularPencilFamily => "SingularPencilFamily",
            MorError::LyapunovFailure(_) => "LyapunovFailure",
            MorError::LineSearchFailure(_) => "LineSearchFailure",
            MorError::Io(_) => "Io",
            MorError::Format(_) => "Format",
        }
    }

    /// True for errors caused by malformed input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            MorError::DimensionMismatch(_)
                | MorError::NonFinite(_)
                | MorError::InvalidInput(_)
                | MorError::Io(_)
                | MorError::Format(_)
                | MorError::NotADelaySystem(_)
                | MorError::NotConjugateClosed
                | MorError::DuplicatePoints(..)
        )
    }
}

pub type Result<T> = std::result::Result<T, MorError>;
