use std::path::PathBuf;

/// Errors raised by the solver, the diagnostics and the runner.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("model domain violated{}: occupancy {occupancy} outside [0, {limit})", cell_suffix(.cell))]
    ModelDomain {
        cell: Option<usize>,
        occupancy: f64,
        limit: f64,
    },

    #[error("unsupported sphere quadrature order {0}")]
    UnsupportedOrder(usize),

    #[error("invalid potential: {0}")]
    Potential(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("internal consistency fault: {0}")]
    Consistency(String),

    #[error("failed to parse {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn cell_suffix(cell: &Option<usize>) -> String {
    match cell {
        Some(c) => format!(" in cell {c}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
