use std::path::PathBuf;

/// Errors raised by the uniformity-testing library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine could not meet its error budget.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested combination of options is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Input data could not be parsed. Each entry is `(line, message)`.
    #[error("parse error in {}: {}", path.display(), summarize(problems))]
    Parse {
        path: PathBuf,
        problems: Vec<(usize, String)>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn summarize(problems: &[(usize, String)]) -> String {
    const SHOWN: usize = 10;
    let mut out = problems
        .iter()
        .take(SHOWN)
        .map(|(line, msg)| format!("line {line}: {msg}"))
        .collect::<Vec<_>>()
        .join("; ");
    if problems.len() > SHOWN {
        out.push_str(&format!("; ... and {} more", problems.len() - SHOWN));
    }
    out
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
