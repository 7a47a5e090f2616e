//! CLI error type with stable exit codes: 2 for I/O, 3 for schema problems
//! in input files, 4 for numeric divergence, 1 for anything else invalid.

use ligt_core::{DatasetError, LayoutHashError, ModelError};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Schema(String),
    Divergence(String),
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Schema(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Invalid(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(msg) => write!(f, "io: {msg}"),
            CliError::Schema(msg) => write!(f, "schema: {msg}"),
            CliError::Divergence(msg) => write!(f, "divergence: {msg}"),
            CliError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(io) => CliError::Io(io.to_string()),
            malformed @ DatasetError::Malformed { .. } => CliError::Schema(malformed.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFiniteLoss { .. } => CliError::Divergence(e.to_string()),
            ModelError::Io(io) => CliError::Io(io.to_string()),
            ModelError::Checkpoint(_) => CliError::Schema(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<LayoutHashError> for CliError {
    fn from(e: LayoutHashError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let io: CliError = std::io::Error::new(std::io::ErrorKind::NotFound, "gone").into();
        assert_eq!(io.exit_code(), 2);
        let schema: CliError = DatasetError::Malformed {
            path: "x".into(),
            line: 3,
            msg: "bad".into(),
        }
        .into();
        assert_eq!(schema.exit_code(), 3);
        let diverged: CliError = ModelError::NonFiniteLoss {
            step: 7,
            loss: f64::NAN,
        }
        .into();
        assert_eq!(diverged.exit_code(), 4);
        assert_eq!(CliError::Invalid("x".into()).exit_code(), 1);
    }
}
