use serde::Serialize;
use thiserror::Error;

/// Failure reported to the user as JSON; `kind` selects the exit code.
#[derive(Debug, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CliError {
    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("numerical failure{}: {reason}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Numerical { reason: String, context: Option<String> },
    #[error("output error on {path}: {reason}")]
    Output { path: String, reason: String },
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn numerical(err: impl std::fmt::Display, context: impl Into<Option<String>>) -> Self {
        CliError::Numerical {
            reason: err.to_string(),
            context: context.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } | CliError::Output { .. } => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let body = serde_json::json!({ "error": self, "message": self.to_string() });
        serde_json::to_string(&body).expect("error serializes")
    }
}

impl From<aif_core::Error> for CliError {
    fn from(e: aif_core::Error) -> Self {
        match e {
            aif_core::Error::InvalidParameter(reason) => CliError::config("", reason),
            other => CliError::numerical(other, None),
        }
    }
}
