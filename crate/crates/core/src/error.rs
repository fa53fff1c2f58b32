use thiserror::Error;

/// Errors produced by the self-calibration toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix has zero or non-finite norm")]
    InvalidMatrix,
    /// The two largest singular values satisfy `sigma2 / sigma1 < 1e-9`.
    #[error("fundamental matrix is effectively rank one (sigma2/sigma1 = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("no correspondence triangulates in front of both cameras")]
    CheiralityAmbiguous,
    #[error("focal length formula is singular (|denominator| = {denominator:e})")]
    DegenerateFormula { denominator: f64 },
    #[error("no real positive focal length")]
    NoRealFocal,
    #[error("polynomial system has no real solution")]
    NoRealSolution,
    #[error("polynomial elimination is numerically rank deficient")]
    SolverFailure,
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("degenerate sample")]
    DegenerateSample,
    #[error("at least {required} correspondences required, got {got}")]
    TooFewPoints { required: usize, got: usize },
    #[error("no model found: every candidate was rejected or degenerate")]
    NoModelFound,
    #[error("could not sample {requested} mutually visible points (got {found})")]
    FrustumEmpty { requested: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
