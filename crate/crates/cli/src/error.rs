//! Driver-level errors: config-file problems with their source line, shell
//! misuse, and everything the library can raise.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// A problem in the run-config file. `line` is 1-based; 0 means the
    /// error concerns the resolved configuration rather than a single line.
    Config { line: usize, message: String },
    /// Misused command line (bad flag combination, mismatched names).
    Usage(String),
    /// Failure while reading or writing `path`.
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    Core(mml_core::MmlError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { line: 0, message } => write!(f, "config: {message}"),
            CliError::Config { line, message } => write!(f, "config line {line}: {message}"),
            CliError::Usage(message) => f.write_str(message),
            CliError::File { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::File { source, .. } => Some(source),
            CliError::Core(e) => Some(e),
            _ => None,
        }
    }
}

impl From<mml_core::MmlError> for CliError {
    fn from(e: mml_core::MmlError) -> Self {
        CliError::Core(e)
    }
}
