use thiserror::Error;

/// Resource estimate attached to budget failures so callers can report what a
/// run would have needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceReport {
    pub rows: usize,
    pub columns: usize,
    /// `rows * columns`, the number of node applications the run performs.
    pub node_updates: u64,
    pub limit: u64,
    /// Bytes held by the propagating state (two buffers).
    pub state_bytes: u64,
}

impl std::fmt::Display for ResourceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} rows x {} columns = {} node updates (limit {}), state buffers {} bytes",
            self.rows, self.columns, self.node_updates, self.limit, self.state_bytes
        )
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("height mismatch: state has {state} nodes, column has {column}")]
    HeightMismatch { state: usize, column: usize },

    #[error("index {index} out of range (limit {limit}) for {what}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("path enumeration needs {required} paths, bound is {bound}")]
    PathBoundExceeded { required: u128, bound: u128 },

    #[error("coin angle {gamma} exceeds pi/2: lattice is under-resolved")]
    UnderResolved { gamma: f64 },

    #[error("resource budget exceeded: {0}")]
    BudgetExceeded(ResourceReport),

    #[error("non-finite amplitude after column {column}")]
    NonFinite { column: usize },

    #[error("{0}")]
    Analysis(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("gap {gap}: {source}")]
    Sweep {
        gap: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
