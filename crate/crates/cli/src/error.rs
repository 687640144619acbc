use std::fmt;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, config values or parameters.
    Usage,
    /// Missing, unreadable or corrupt input files.
    Data,
    Internal,
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: Option<&'static str>,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            stage: None,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            stage: None,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Internal,
            stage: None,
            message: message.into(),
        }
    }

    pub fn with_stage(mut self, stage: &'static str) -> Self {
        self.stage = Some(stage);
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::Data => EXIT_DATA,
            ErrorKind::Internal => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(stage) => write!(f, "[{stage}] {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

fn forest_kind(e: &discforest::Error) -> ErrorKind {
    use discforest::Error as E;
    match e {
        E::InvalidParam(_) => ErrorKind::Usage,
        E::Corrupt(_) | E::Version(_) | E::Io(_) | E::ModeMismatch { .. } | E::Domain(_) => ErrorKind::Data,
    }
}

impl From<discforest::Error> for CliError {
    fn from(e: discforest::Error) -> Self {
        CliError {
            kind: forest_kind(&e),
            stage: None,
            message: e.to_string(),
        }
    }
}

impl From<discforest_mouse::Error> for CliError {
    fn from(e: discforest_mouse::Error) -> Self {
        use discforest_mouse::Error as E;
        let kind = match &e {
            E::Forest(inner) => forest_kind(inner),
            E::Pose(_) => ErrorKind::Usage,
            E::Format(_) | E::Data(_) | E::Io(_) | E::Json(_) => ErrorKind::Data,
            E::Model(_) | E::Render(_) => ErrorKind::Internal,
        };
        CliError {
            kind,
            stage: None,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::usage(format!("invalid config: {e}"))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Attach a stage tag to errors of a pipeline step.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<CliError>> Stage<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| {
            let mut e = e.into();
            e.stage.get_or_insert(stage);
            e
        })
    }
}
