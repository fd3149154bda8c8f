use serde::Serialize;

/// Failure class, which fixes the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad configuration or input data (exit 2).
    Config,
    /// IO failure or exhausted enumeration budget (exit 3).
    Resource,
    /// Numerical failure during estimation (exit 4).
    Numeric,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// Offending config key, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Config,
            message: message.into(),
            key: None,
        }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Resource,
            message: message.into(),
            key: None,
        }
    }

    pub fn with_key(mut self, key: &str) -> Self {
        self.key = Some(key.to_string());
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Resource => 3,
            ErrorKind::Numeric => 4,
        }
    }

    /// One-line JSON document written to stderr on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            error: &'a CliError,
            exit_code: i32,
        }
        serde_json::to_string(&Doc {
            error: self,
            exit_code: self.exit_code(),
        })
        .unwrap_or_else(|_| format!("{{\"error\":{{\"message\":{:?}}}}}", self.message))
    }
}

impl From<localband::Error> for CliError {
    fn from(e: localband::Error) -> Self {
        let kind = if e.is_budget() {
            ErrorKind::Resource
        } else if e.is_numeric() {
            ErrorKind::Numeric
        } else {
            ErrorKind::Config
        };
        CliError {
            kind,
            message: e.to_string(),
            key: None,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::resource(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::resource(e.to_string())
        } else {
            CliError::config(format!("csv: {e}"))
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::resource(e.to_string())
        } else {
            CliError::config(format!("json: {e}"))
        }
    }
}
