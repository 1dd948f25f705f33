use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    /// Malformed input: schema violation, unknown preset, bad flag value.
    pub const INPUT: i32 = 2;
    pub const UNWRITABLE: i32 = 3;
    pub const RANK_DEFICIENT: i32 = 4;
    /// The solver stopped for a reason other than the gradient tolerance.
    pub const NOT_STATIONARY: i32 = 10;
    pub const ALL_RUNS_FAILED: i32 = 11;
    /// Stationary points were found but do not describe the same state.
    pub const MINIMA_DISAGREE: i32 = 12;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("cannot write {}: {source}", path.display())]
    Unwritable {
        path: PathBuf,
        source: qst_core::Error,
    },

    #[error(transparent)]
    Core(#[from] qst_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use qst_core::Error as E;
        match self {
            CliError::Input(_) => exit::INPUT,
            CliError::Unwritable { .. } => exit::UNWRITABLE,
            CliError::Core(e) => match e {
                E::Schema(_)
                | E::InvalidArgument(_)
                | E::Dimension { .. }
                | E::InvalidState(_)
                | E::NotHermitian(_)
                | E::Capacity { .. }
                | E::BoundaryState { .. }
                | E::DegenerateParameter(_)
                | E::Json(_) => exit::INPUT,
                E::NotInformationallyComplete { .. } => exit::RANK_DEFICIENT,
                E::AllRunsFailed { .. } => exit::ALL_RUNS_FAILED,
                _ => exit::FAILURE,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
