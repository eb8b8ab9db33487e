use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },
    #[error("entry ({i},{j}) lies outside the support at degree {degree}")]
    OffSupport { degree: usize, i: usize, j: usize },
    #[error("matrix is not irreducible")]
    NotIrreducible,
    #[error("not a graph isomorphism: {0}")]
    GraphMismatch(String),
    #[error("state counts differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("matrix is not essential")]
    NotEssential,
    #[error("permutation is not a graph isomorphism between the inputs")]
    NotGraphIso,
    #[error("operator was not built as a shift")]
    NotAShift,
    #[error("operator is not homogeneous")]
    NotHomogeneous,
    #[error("degree {degree} exceeds truncation cap {cap}")]
    DegreeOverflow { degree: usize, cap: usize },
    #[error("gauge scalar must have unit modulus")]
    NotUnitModulus,
    #[error("streamlined witness paths of different lengths {0} and {1} for the same triple")]
    AmbiguousWitnessLength(usize, usize),
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
