use std::path::PathBuf;

use serde::Serialize;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {message}")]
    Config { message: String, field: Option<String> },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Compute(#[from] varfdr::Error),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            message: message.into(),
            field: None,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) => EXIT_COMPUTE,
            _ => EXIT_CONFIG,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Data { .. } => "data",
            CliError::Io { .. } => "io",
            CliError::Compute(_) => "compute",
        }
    }

    /// Machine-readable form written to stderr on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            field: Option<&'a str>,
            exit_code: i32,
        }
        let field = match self {
            CliError::Config { field, .. } => field.as_deref(),
            _ => None,
        };
        let body = Body {
            kind: self.kind(),
            message: self.to_string(),
            field,
            exit_code: self.exit_code(),
        };
        serde_json::json!({ "error": body }).to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
