use std::path::PathBuf;

use gridsched_milp::MilpError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to parse {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("invalid {path}: {msg}")]
    Validation { path: String, msg: String },

    #[error("topology leaves load-carrying bus {bus} disconnected from every reference bus")]
    SingularTopology { bus: u32 },

    #[error("{windows} windows of {days} days do not fit in month {month} ({month_days} days)")]
    InfeasibleWindow { month: u8, windows: usize, days: usize, month_days: usize },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("no proxy records for topology key {key:#x}")]
    MissingTopology { key: u64 },

    #[error("every month combination of outage row {row} has zero probability")]
    DegenerateDistribution { row: usize },

    #[error("optimization did not converge within {iters} iterations")]
    MaxIterations { iters: usize, best: Box<crate::ce::OptimizeResult> },

    #[error("oracle drift in {file}: {}", .diffs.join("; "))]
    OracleDrift { file: String, diffs: Vec<String> },

    #[error("{what} is infeasible")]
    Infeasible { what: String },

    #[error("case hash mismatch: dataset built for {expected}, case is {found}")]
    CaseMismatch { expected: String, found: String },

    #[error(transparent)]
    Milp(#[from] MilpError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    pub fn validation(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation { path: path.into(), msg: msg.into() }
    }

    pub fn parse(what: impl Into<String>, msg: impl ToString) -> Self {
        Error::Parse { what: what.into(), msg: msg.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Wraps the error with a location such as `scenario 1, month 3`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error beneath any [`Error::Context`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
