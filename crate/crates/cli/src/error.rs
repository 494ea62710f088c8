use thiserror::Error;

/// Failure classes of a run, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant check failed: {0}")]
    Invariant(String),

    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<bccwalk::Error> for CliError {
    fn from(e: bccwalk::Error) -> Self {
        use bccwalk::Error as E;
        match e {
            E::NotHermitian { .. } | E::NotUnitary { .. } | E::BranchCut { .. } | E::PacketWrapped { .. } => {
                CliError::Invariant(e.to_string())
            }
            E::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
