use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("inconsistent state: {0}")]
    State(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(
        "matrix `{matrix}` is not positive definite after jitter {jitter:e} \
         (smallest eigenvalue estimate {min_eigenvalue:e})"
    )]
    NotPositiveDefinite {
        matrix: String,
        min_eigenvalue: f64,
        jitter: f64,
    },

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: String, step: usize },

    #[error("direct-ODE instability at step {step}: |K_uu|_inf = {norm:e}")]
    DirectOdeInstability { step: usize, norm: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("task {task}: {source}")]
    Task {
        task: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    /// Attach a 1-based task index to an error raised while processing that task.
    pub fn in_task(self, task: usize) -> Self {
        match self {
            e @ Error::Task { .. } => e,
            other => Error::Task {
                task,
                source: Box::new(other),
            },
        }
    }
}
