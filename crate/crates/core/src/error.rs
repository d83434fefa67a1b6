//! Error types shared by every stage of the pipeline.

use std::fmt;

/// Errors raised by terrain handling, dynamics, control, planning and simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Grid or config document could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The mixing system produced a negative squared rotor speed.
    #[error("infeasible thrust: rotor {rotor} has squared speed {square:.6e}")]
    InfeasibleThrust { rotor: usize, square: f64 },

    /// Flat-state inversion or decoupling matrix is singular.
    #[error("controller singularity: {0}")]
    Singularity(String),

    /// A* exhausted its open set or expansion budget.
    #[error("no path: {0}")]
    NoPath(String),

    /// Bisection could not find a valid segment duration.
    #[error("no feasible time: {0}")]
    NoFeasibleTime(String),

    /// The integrator produced a non-finite state.
    #[error("numerical blowup: {0}")]
    NumericalBlowup(String),

    /// Invalid mission configuration.
    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Domain(_) => "domain",
            Error::InfeasibleThrust { .. } => "infeasible-thrust",
            Error::Singularity(_) => "singularity",
            Error::NoPath(_) => "no-path",
            Error::NoFeasibleTime(_) => "no-feasible-time",
            Error::NumericalBlowup(_) => "numerical-blowup",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage in which a mission failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissionPhase {
    Config,
    Terrain,
    Plan,
    Time,
    Simulate,
}

impl MissionPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            MissionPhase::Config => "config",
            MissionPhase::Terrain => "terrain",
            MissionPhase::Plan => "plan",
            MissionPhase::Time => "time",
            MissionPhase::Simulate => "simulate",
        }
    }
}

impl fmt::Display for MissionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An [`Error`] tagged with the mission phase that produced it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{phase} phase failed: {error}")]
pub struct MissionError {
    pub phase: MissionPhase,
    #[source]
    pub error: Error,
}

impl MissionError {
    pub fn new(phase: MissionPhase, error: Error) -> Self {
        Self { phase, error }
    }

    pub fn category(&self) -> &'static str {
        self.error.category()
    }
}
