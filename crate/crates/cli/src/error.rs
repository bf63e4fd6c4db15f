use std::fmt;
use std::io;
use std::path::Path;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    MissingInput,
    Endpoint,
    InvalidInput,
    Runtime,
    Output,
}

impl Kind {
    pub fn code(self) -> i32 {
        match self {
            Kind::Config => 3,
            Kind::MissingInput => 4,
            Kind::Endpoint => 5,
            Kind::InvalidInput => 6,
            Kind::Runtime => 7,
            Kind::Output => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Config => "config",
            Kind::MissingInput => "missing_input",
            Kind::Endpoint => "endpoint",
            Kind::InvalidInput => "invalid_input",
            Kind::Runtime => "runtime",
            Kind::Output => "output",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Kind::Config, message)
    }

    pub fn invalid(path: &Path, e: impl fmt::Display) -> Self {
        Self::new(Kind::InvalidInput, format!("{}: {e}", path.display()))
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        Self::new(Kind::Runtime, e.to_string())
    }

    pub fn read(path: &Path, e: io::Error) -> Self {
        Self::new(Kind::MissingInput, format!("{}: {e}", path.display()))
    }

    pub fn write(path: &Path, e: io::Error) -> Self {
        Self::new(Kind::Output, format!("{}: {e}", path.display()))
    }

    /// One JSON object on one line, for scripts.
    pub fn line(&self) -> String {
        serde_json::json!({
            "error": self.kind.name(),
            "exit": self.kind.code(),
            "message": self.message,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.name(), self.message)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
