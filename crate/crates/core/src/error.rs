use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    Alphabet(String),
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("not a sub-shape: {0}")]
    NotSubShape(String),
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("table has zero total mass")]
    ZeroMass,
    #[error("marginal mismatch: total variation {tv:e} exceeds {tol:e}")]
    MarginalMismatch { tv: f64, tol: f64 },
    #[error("invariance violated: {0}")]
    Invariance(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("radius {found} exceeds {limit}")]
    Radius { found: usize, limit: usize },
    #[error("size cap exceeded: {0}")]
    Cap(String),
    #[error("degree distribution: {0}")]
    Degree(String),
    #[error("potential: {0}")]
    Potential(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("sampler gave up after {attempts} rejected pairings")]
    Rejections { attempts: u64 },
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag used by the command line error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Alphabet(_) => "alphabet",
            Error::Shape(_) => "shape",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::NotSubShape(_) => "not-sub-shape",
            Error::InvalidLaw(_) => "invalid-law",
            Error::ZeroMass => "zero-mass",
            Error::MarginalMismatch { .. } => "marginal-mismatch",
            Error::Invariance(_) => "invariance",
            Error::Graph(_) => "graph",
            Error::Radius { .. } => "radius",
            Error::Cap(_) => "cap",
            Error::Degree(_) => "degree",
            Error::Potential(_) => "potential",
            Error::Parse { .. } => "parse",
            Error::Rejections { .. } => "rejections",
            Error::Domain(_) => "domain",
        }
    }
}
