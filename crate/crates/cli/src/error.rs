use std::fmt;
use std::io;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    /// Flags that parse but do not make sense together.
    Usage(String),
    Io {
        context: String,
        source: io::Error,
    },
    /// Unreadable or incompatible sketch files.
    Format(String),
    /// Some validation checks failed.
    Checks {
        failed: usize,
        total: usize,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Checks { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Format(_) => 3,
        }
    }

    pub fn io(path: Option<&Path>, action: &str, source: io::Error) -> Self {
        let context = match path {
            Some(p) => format!("{action} `{}`", p.display()),
            None if action.starts_with("writ") => format!("{action} standard output"),
            None => format!("{action} standard input"),
        };
        CliError::Io { context, source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io { context, source } => write!(f, "{context}: {source}"),
            CliError::Format(msg) => write!(f, "{msg}"),
            CliError::Checks { failed, total } => write!(f, "{failed} of {total} checks failed"),
        }
    }
}

impl std::error::Error for CliError {}
