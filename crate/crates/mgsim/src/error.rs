use thiserror::Error;

/// Errors raised while loading or validating a scenario.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read scenario file `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse scenario file `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Errors raised during a simulation run.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A continuous state left the finite range; carries a diagnostic of the
    /// offending variable and the time at which it happened.
    #[error("numerical abort at t={time}s: state `{variable}` became {value}")]
    NonFinite {
        time: f64,
        variable: String,
        value: f64,
    },
    #[error("i/o error writing `{path}`: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

/// Domain errors for pure measurement helpers.
#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("voltage magnitude must be positive, got {0}")]
    NonPositiveVoltage(f64),
    #[error("cannot average an empty list")]
    EmptyList,
}
