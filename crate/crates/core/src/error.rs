use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Geometry or state data that cannot describe a valid lattice.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Every violated precondition of an experiment, collected before any run starts.
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("no non-trivial equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("integration left the admissible box at t = {t}: component {index} = {value}")]
    StepSize { t: f64, index: usize, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Total rate vanished; the chain sits in an absorbing state.
    #[error("absorbing state reached at t = {0}")]
    Absorbing(f64),

    #[error("interface collapsed: {0}")]
    InterfaceCollapsed(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Configuration(_) => "configuration",
            Error::Validation(_) => "validation",
            Error::NoEquilibrium(_) => "no-equilibrium",
            Error::StepSize { .. } => "step-size",
            Error::Precondition(_) => "precondition",
            Error::Absorbing(_) => "absorbing",
            Error::InterfaceCollapsed(_) => "interface-collapsed",
            Error::Input(_) => "input",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Configuration(_) | Error::Input(_) | Error::Parse(_) => 2,
            Error::Io(_) => 3,
            _ => 4,
        }
    }
}
