use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input. `offset` is a byte offset for binary files and a
    /// 1-based line number for text files.
    #[error("parse error at {unit} {offset}: {message}")]
    Parse {
        unit: OffsetUnit,
        offset: u64,
        message: String,
    },

    #[error("event {index} out of bounds: ({x}, {y}) on a {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },

    #[error("time regression: {t} after {previous}")]
    TimeRegression { previous: f64, t: f64 },

    #[error("degenerate coding: no response exceeds r_min = {r_min}")]
    DegenerateCoding { r_min: f64 },

    #[error("learning neuron {neuron} has zero total input weight")]
    DeadNeuron { neuron: usize },

    #[error("spike address {address} out of range for {n_addresses} encoding neurons")]
    AddressOutOfRange { address: u32, n_addresses: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("class count mismatch: model has {model} classes, data has {data}")]
    ClassMismatch { model: usize, data: usize },

    #[error("{0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetUnit {
    Byte,
    Line,
}

impl std::fmt::Display for OffsetUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OffsetUnit::Byte => f.write_str("byte"),
            OffsetUnit::Line => f.write_str("line"),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse_line(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            unit: OffsetUnit::Line,
            offset: line,
            message: message.into(),
        }
    }

    pub(crate) fn parse_byte(offset: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            unit: OffsetUnit::Byte,
            offset,
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end: 2 for data errors,
    /// 3 for numerical degeneracy, 1 for configuration/usage problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateCoding { .. } | Error::DeadNeuron { .. } => 3,
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
