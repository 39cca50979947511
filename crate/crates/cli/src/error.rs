use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use poisson_bkg::Error;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Convergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io(_) => 4,
        })
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Convergence(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

fn is_convergence(e: &Error) -> bool {
    match e {
        Error::NonConvergence { .. } | Error::CellFailed { .. } => true,
        Error::Replicate { source, .. } => is_convergence(source),
        _ => false,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if is_convergence(&e) {
            CliError::Convergence(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
