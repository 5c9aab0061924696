use std::path::PathBuf;

use thiserror::Error;

/// Rows listed in a schema error before truncation.
pub const MAX_REPORTED_ROWS: usize = 20;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] netshock_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{}: {} offending rows{}\n  {}", path.display(), total, if *total > rows.len() { format!(" (first {})", rows.len()) } else { String::new() }, rows.join("\n  "))]
    Schema { path: PathBuf, rows: Vec<String>, total: usize },

    #[error("configuration: {0}")]
    Config(String),

    #[error("acceptance criteria failed: {0:?}")]
    Acceptance(Vec<usize>),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }
}
