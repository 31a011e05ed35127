use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: bad value for '{key}': {message}")]
    BadValue { line: usize, key: String, message: String },

    #[error("missing required key '{0}'")]
    MissingKey(String),

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("{0}")]
    Core(#[from] bistab_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} acceptance check(s) failed: {names}")]
    Acceptance { failed: usize, names: String },
}

/// Machine-readable form printed on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// 1 for usage and config errors (including systems the core rejects),
    /// 2 for numerical and I/O failures, 3 for failed preset checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(bistab_core::Error::Io(_)) | CliError::Io { .. } => 2,
            CliError::Acceptance { .. } => 3,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Syntax { .. } => "syntax",
            CliError::UnknownKey { .. } => "unknown_key",
            CliError::BadValue { .. } => "bad_value",
            CliError::MissingKey(_) => "missing_key",
            CliError::Invalid(_) => "invalid_config",
            CliError::UnknownPreset(_) => "unknown_preset",
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(_) => "invalid_input",
            CliError::Io { .. } => "io",
            CliError::Acceptance { .. } => "acceptance",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_failure_class() {
        assert_eq!(CliError::UnknownKey { line: 3, key: "x".into() }.exit_code(), 1);
        assert_eq!(CliError::Core(bistab_core::Error::InvalidArgument("dt".into())).exit_code(), 1);
        let numerical = CliError::Core(bistab_core::Error::EnergyIncrease { increase: 1e-9 });
        assert_eq!((numerical.exit_code(), numerical.kind()), (2, "numerical"));
        assert_eq!(CliError::Acceptance { failed: 1, names: "a".into() }.exit_code(), 3);
        let report = CliError::MissingKey("mode".into()).report();
        assert_eq!((report.error, report.exit_code), ("missing_key", 1));
    }
}
