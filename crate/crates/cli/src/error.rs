use std::fmt;

use muxrisk::ingest::IngestError;
use muxrisk::windows::WindowError;

/// Failure classes, each with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Convergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Convergence(_) => "convergence",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Convergence(m) | CliError::Io(m) => m,
        }
    }

    /// `error code=<n> kind=<kind> message="<escaped>"` on one line.
    pub fn machine_line(&self) -> String {
        let escaped: String = self
            .message()
            .chars()
            .flat_map(|c| match c {
                '"' => vec!['\\', '"'],
                '\\' => vec!['\\', '\\'],
                '\n' => vec!['\\', 'n'],
                '\r' => vec!['\\', 'r'],
                c => vec![c],
            })
            .collect();
        format!(
            "error code={} kind={} message=\"{}\"",
            self.exit_code(),
            self.kind(),
            escaped
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(e) => e.into(),
            IngestError::Csv(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<WindowError> for CliError {
    fn from(e: WindowError) -> Self {
        match e {
            WindowError::Csv(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<muxrisk::tsa::TsaError> for CliError {
    fn from(e: muxrisk::tsa::TsaError) -> Self {
        CliError::Validation(e.to_string())
    }
}
