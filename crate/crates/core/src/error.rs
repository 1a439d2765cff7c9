use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("I/O error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("invalid {what}: {message}")]
    Invalid { what: String, message: String },
    #[error("record {record}: {message}")]
    Record { record: usize, message: String },
    #[error("unknown truck configuration `{0}`")]
    UnknownConfiguration(String),
    #[error("over-speed: {machine} at {speed_rad_s:.1} rad/s exceeds limit {limit_rad_s:.1} rad/s")]
    OverSpeed { machine: &'static str, speed_rad_s: f64, limit_rad_s: f64 },
    #[error("battery pack fault: {0}")]
    PackFault(String),
    #[error("energy-infeasible: {0}")]
    EnergyInfeasible(String),
    #[error("{0}")]
    Empty(String),
}

impl SimError {
    pub fn invalid(what: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Invalid { what: what.into(), message: message.into() }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        SimError::Parse { context: context.into(), message: message.to_string() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SimError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// True for errors caused by bad input rather than simulation outcome.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::Parse { .. }
                | SimError::Invalid { .. }
                | SimError::Record { .. }
                | SimError::UnknownConfiguration(_)
                | SimError::Empty(_)
        )
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
