use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("interface is empty: no INTERFACE-tagged boundary edges")]
    EmptyInterface,

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("point s = {s} is not on edge [{left}, {right}]")]
    OffEdge { s: f64, left: f64, right: f64 },

    #[error("incompressible limit: Poisson ratio must satisfy -1 < nu < 0.5, got {0}")]
    Incompressible(f64),

    #[error("singular system: factorization broke down at dof {dof} ({block})")]
    SingularSystem { dof: usize, block: &'static str },

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("system too large: {dofs} dofs exceeds the direct-solver limit of {limit}")]
    TooLarge { dofs: usize, limit: usize },

    #[error("linear solve inaccurate: relative residual {0:.3e}")]
    Inaccurate(f64),

    #[error("rate undefined: error is exactly zero at level {0}")]
    ExactSolution(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}
