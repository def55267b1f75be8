use std::io;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate update at step {step}: {reason}")]
    Degenerate { step: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Degenerate { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Degenerate { .. } => "degenerate",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON for the diagnostic stream.
    pub fn to_json(&self) -> String {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "reason": self.to_string(),
        });
        match self {
            CliError::Degenerate { step, .. } => v["step"] = json!(step),
            CliError::Io { path, .. } => v["path"] = json!(path),
            CliError::Config(_) => {}
        }
        v.to_string()
    }

    pub fn io(path: impl AsRef<std::path::Path>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.as_ref().display().to_string();
        move |source| CliError::Io { path, source }
    }
}

impl From<hamlearn_core::Error> for CliError {
    fn from(e: hamlearn_core::Error) -> Self {
        match e {
            hamlearn_core::Error::Io(source) => CliError::Io { path: "<stream>".into(), source },
            hamlearn_core::Error::Degenerate => CliError::Degenerate { step: 0, reason: e.to_string() },
            other => CliError::Config(other.to_string()),
        }
    }
}
