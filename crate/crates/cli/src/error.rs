use deltagas_core::Error as CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("verification failed: {0}")]
    Verify(String),

    #[error("config: {0}")]
    Config(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical: {0}")]
    Numerical(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status: 1 verification, 2 config, 3 infeasible,
    /// 4 numerical. I/O failures count as configuration problems (bad paths).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InfeasibleGrid { .. } | CoreError::CostCeiling(_) | CoreError::TooManyParticles { .. } => {
                CliError::Infeasible(msg)
            }
            CoreError::NonFinite { .. }
            | CoreError::TermOverflow { .. }
            | CoreError::PoleProximity { .. }
            | CoreError::SolverDivergence(_) => CliError::Numerical(msg),
            CoreError::InvalidPermutation(_)
            | CoreError::SlotOutOfRange { .. }
            | CoreError::InvalidCoupling(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::InvalidQuery(_)
            | CoreError::InvalidBudget(_)
            | CoreError::ZeroTime
            | CoreError::InvalidState(_)
            | CoreError::Lattice(_)
            | CoreError::GridMismatch(_) => CliError::Config(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
