use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid group definition: {0}")]
    InvalidGroup(String),

    #[error("group enumeration did not close within word length {0}")]
    WordLengthExceeded(usize),

    #[error("unsupported dimension {0}; polytope routines handle n <= 3")]
    UnsupportedDimension(usize),

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("half-space intersection is unbounded")]
    Unbounded,

    #[error("half-space intersection is empty")]
    EmptyIntersection,

    #[error("point {0:?} is fixed by a non-identity group element")]
    FixedPoint(Vec<f64>),

    #[error("local group too small: {0}; re-enumerate with a larger margin")]
    LocalGroupTooSmall(String),

    #[error("no local-group element maps {0:?} into the transversal")]
    ProjectionFailed(Vec<f64>),

    #[error("epsilon-net is empty for epsilon = {0}")]
    EmptyNet(f64),

    #[error("orbit graph is disconnected ({0} components); increase delta")]
    Disconnected(usize),

    #[error("vertex {0} has no neighbours")]
    IsolatedVertex(usize),

    #[error("requested {requested} eigenpairs but only {available} are available")]
    TooManyEigenpairs { requested: usize, available: usize },

    #[error("mass matrix is numerically singular beyond regularization")]
    SingularMass,

    #[error("degenerate MDS input: no positive eigenvalues")]
    DegenerateMds,

    #[error("unknown group '{name}'; valid names: {valid}")]
    UnknownGroup { name: String, valid: String },

    #[error("cannot parse '{0}' as a number")]
    ParseNumber(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
