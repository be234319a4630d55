use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or arguments. Exit code 2.
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// Reading or writing files failed. Exit code 3.
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<knnbandit::Error> for CliError {
    fn from(err: knnbandit::Error) -> Self {
        use knnbandit::Error;
        let msg = match &err {
            Error::UnboundedRewards => format!("policy.kind: {err}"),
            Error::PeelingUndefined(_) => format!("delta: {err}"),
            _ => err.to_string(),
        };
        CliError::Validation(msg)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
