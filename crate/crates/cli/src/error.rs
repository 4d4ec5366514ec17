use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input: arguments, configs or files. Exit status 1.
    #[error("{0}")]
    Validation(String),
    /// Failure while running. Exit status 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }
}

impl From<semtag_core::Error> for CliError {
    fn from(e: semtag_core::Error) -> Self {
        let missing_input =
            matches!(&e, semtag_core::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound);
        if e.is_validation() || missing_input {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<semtag_review::ReviewError> for CliError {
    fn from(e: semtag_review::ReviewError) -> Self {
        use semtag_review::ReviewError as R;
        match e {
            R::Core(core) => core.into(),
            R::Orphans { .. } | R::Log { .. } | R::UnknownItem(_) | R::BadRequest(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}
