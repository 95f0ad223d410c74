use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A binary record file whose length is not a whole number of records.
    #[error("{}: truncated record at byte offset {offset} (record size {record_size} bytes)", path.display())]
    Truncated {
        path: PathBuf,
        offset: u64,
        record_size: usize,
    },

    /// A text file with a malformed line. `line` is 1-based; 0 means the
    /// problem is not tied to a single line (e.g. a missing key).
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Inputs that violate an operation's preconditions (mismatched
    /// dimensions, label/scan length mismatch, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
