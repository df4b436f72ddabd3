use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("semantic error: {0}")]
    Semantic(String),

    #[error("dimension mismatch at layer {layer}: expected {expected}, found {found}")]
    DimensionMismatch {
        layer: usize,
        expected: String,
        found: String,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("invalid prune spec: {0}")]
    InvalidPruneSpec(String),

    #[error("limits exceeded after {states} states and {transitions} transitions (max states {max_states}, max transitions {max_transitions})")]
    LimitExceeded {
        states: usize,
        transitions: usize,
        max_states: usize,
        max_transitions: usize,
    },

    #[error("solver did not converge after {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::Semantic(_)
            | Error::DimensionMismatch { .. }
            | Error::SchemaMismatch(_)
            | Error::UnknownFeature(_)
            | Error::InvalidPruneSpec(_)
            | Error::InvalidConfig(_) => 2,
            Error::InvalidModel(_) => 3,
            Error::LimitExceeded { .. } => 4,
            Error::NoConvergence { .. } => 5,
            Error::Io { .. } | Error::Csv(_) => 1,
        }
    }

    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        match err.classify() {
            serde_json::error::Category::Data => Error::Semantic(err.to_string()),
            _ => Error::Syntax {
                line: err.line(),
                column: err.column(),
                message: err.to_string(),
            },
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
