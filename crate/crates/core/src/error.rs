use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument or configuration value violates its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A stateful object was queried before it held usable data.
    #[error("invalid state: {0}")]
    State(String),

    /// Inverse kinematics target outside the reachable workspace.
    #[error("unreachable target: distance {distance:.6} m exceeds reach {reach:.6} m (closest reachable point {closest:?})")]
    Unreachable {
        distance: f64,
        reach: f64,
        closest: [f64; 3],
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed rigid body model.
    #[error("model error: {0}")]
    Model(String),

    /// Configuration text that could not be parsed or validated.
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Self::Parameter(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Self::Numeric(msg.into())
    }

    /// Config error from a TOML parse failure, with the 1-based line of the
    /// offending span in `text`.
    pub(crate) fn from_toml(err: &toml::de::Error, text: &str) -> Self {
        let line = err.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Self::Config { line, message: err.message().trim().to_string() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}
