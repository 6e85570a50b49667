use std::fmt;
use std::io;

use porepath::eval::oracle::OracleError;
use porepath::eval::EvalError;
use porepath::formats::FormatError;
use porepath::pipeline::PipelineError;
use porepath::{ModelError, SimulationError};

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Usage = 1,
    Io = 2,
    Invariant = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { exit: Exit::Usage, msg: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Self { exit: Exit::Io, msg: msg.into() }
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Self { exit: Exit::Invariant, msg: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io { .. } => Self::io(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        if e.is_io() {
            Self::io(e.to_string())
        } else {
            Self::usage(e.to_string())
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Self::usage(e.to_string()),
            _ => Self::invariant(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::TooLarge { .. } => Self::usage(e.to_string()),
            OracleError::Trellis(_) => Self::invariant(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Simulation(s) => s.into(),
            EvalError::Pipeline(p) => p.into(),
            EvalError::EmptyGrid | EvalError::TooFewEvents { .. } => Self::usage(e.to_string()),
            EvalError::ChannelFailed { .. } | EvalError::Score(_) => Self::invariant(e.to_string()),
        }
    }
}
