use thiserror::Error;

/// Front-end failure, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Parse(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<twpa_core::Error> for CliError {
    fn from(e: twpa_core::Error) -> Self {
        use twpa_core::Error as E;
        match e {
            E::Divergence { .. } | E::Overdrive { .. } | E::Instability { .. } => CliError::Solver(e.to_string()),
            E::Singular { .. } | E::SingularElement { .. } | E::IllConditionedTermination { .. } => {
                CliError::Solver(e.to_string())
            }
            E::Parse { .. } | E::Unsupported { .. } => CliError::Parse(e.to_string()),
            E::InvalidParameter { name, reason } => {
                CliError::Config(format!("{}: {reason}", crate::config::field_path(name)))
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
