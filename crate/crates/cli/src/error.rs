//! Errors of the command-line frontend and their exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<shgcint_core::Error> for CliError {
    fn from(e: shgcint_core::Error) -> Self {
        use shgcint_core::Error as E;
        let msg = e.to_string();
        if e.is_non_convergence() {
            return CliError::Solver(msg);
        }
        match root_cause(&e) {
            E::Factorization(_) | E::InaccurateSolve { .. } | E::NonFinite { .. } => CliError::Solver(msg),
            E::Io(_) | E::Json(_) | E::Format(_) => CliError::Io(msg),
            _ => CliError::Config(msg),
        }
    }
}

fn root_cause(e: &shgcint_core::Error) -> &shgcint_core::Error {
    match e {
        shgcint_core::Error::Angle { source, .. } | shgcint_core::Error::Realization { source, .. } => {
            root_cause(source)
        }
        _ => e,
    }
}
