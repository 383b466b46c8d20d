//! Error category → exit code mapping.

use std::fmt;

use ornate_core::corpus::CorpusError;
use ornate_core::eval::EvalError;
use ornate_core::neural::NeuralError;
use ornate_core::textpipe::TextError;
use ornate_core::training::TrainError;

/// Exit codes: usage 1, I/O 2, data validation 3, numeric failure 4.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) | CliError::Numeric(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<TextError> for CliError {
    fn from(e: TextError) -> Self {
        match e {
            TextError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::Io { .. } => CliError::Io(e.to_string()),
            NeuralError::NonFinite { .. } | NeuralError::BackwardWithoutForward => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Neural(inner) => inner.into(),
            TrainError::Eval(inner) => inner.into(),
            TrainError::Io { .. } => CliError::Io(e.to_string()),
            TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Neural(inner) => inner.into(),
            EvalError::Text(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Opens a file for line reading with path context in the error.
pub fn read_lines(path: &std::path::Path) -> Result<Vec<String>, CliError> {
    match std::fs::read_to_string(path) {
        Ok(content) => Ok(content.lines().map(str::to_owned).collect()),
        Err(e) => Err(CliError::Io(format!("{}: {e}", path.display()))),
    }
}

pub fn write_file(path: &std::path::Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
