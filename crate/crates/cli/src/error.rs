use paoi_core::Error;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    /// The requested analysis does not cover the model; the message names
    /// the mode to fall back to.
    #[error("capability error: {0}")]
    Capability(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Capability(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Wraps a core error, prefixing parameter paths with `prefix`.
    pub fn from_core_at(prefix: &str, e: Error) -> Self {
        let join = |field: &str| {
            if prefix.is_empty() {
                field.to_string()
            } else {
                format!("{prefix}.{field}")
            }
        };
        match e {
            Error::InvalidParameter { field, reason } => {
                CliError::Validation(format!("{}: {reason}", join(&field)))
            }
            Error::Unstable { .. } => CliError::Validation(join(&format!("classes: {e}"))),
            Error::UnsupportedModel(m) => CliError::Capability(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_core_at("", e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{ctx}: {m}")),
            CliError::Capability(m) => CliError::Capability(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{ctx}: {m}")),
        }
    }
}
