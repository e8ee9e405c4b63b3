use thiserror::Error;

/// Errors raised by the cell-problem library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("bad model parameters: {0}")]
    BadParams(String),
    #[error("normal vector is not a unit vector (|nu| = {0})")]
    NonUnitNormal(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(
        "Neumann problem incompatible: normal flux imbalance {imbalance:e} exceeds {tolerance:e}"
    )]
    NeumannIncompatible { imbalance: f64, tolerance: f64 },
    #[error("solver diverged: relative residual {0:e}")]
    SolverDiverged(f64),
    #[error("profile is not admissible: {0}")]
    InadmissibleProfile(String),
    #[error("degenerate scale problem (A = 0 and B = 0)")]
    DegenerateScale,
    #[error("unknown initialisation strategy `{0}`")]
    BadStrategy(String),
    #[error("optimizer did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("Rankine-Hugoniot condition violated: residual {0:e}")]
    RankineHugoniotViolated(f64),
    #[error("degenerate space-time normal: spatial part vanishes")]
    DegenerateNormal,
    #[error("oracle requires a scalar problem")]
    NonScalar,
    #[error("state dimension {0} too large for the lattice oracle")]
    DimensionTooLarge(usize),
    #[error("problem too large for brute force ({0} unknowns)")]
    ProblemTooLarge(usize),
    #[error("epsilon {epsilon} too large: transition half-width {width} reaches the box boundary at distance {limit}")]
    EpsilonTooLarge {
        epsilon: f64,
        width: f64,
        limit: f64,
    },
    #[error("invalid domain: {0}")]
    BadDomain(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
