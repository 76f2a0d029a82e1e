use hip_core::HipError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("verification failed: {}", .0.join(", "))]
    VerifyFailed(Vec<String>),

    #[error("cannot write output: {0}")]
    Output(String),

    #[error(transparent)]
    Core(#[from] HipError),
}

impl CliError {
    /// 0 ok, 1 verify failure, 2 config, 3 gradient floor, 4 solver,
    /// 5 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Output(_) => 4,
            CliError::Core(e) => match e {
                HipError::GradientFloorViolated { .. } => 3,
                HipError::Divergence(_) | HipError::NeighborhoodExceeded { .. } => 5,
                HipError::GridTooSmall(_)
                | HipError::ExponentOutOfRange(_)
                | HipError::InvalidArgument(_)
                | HipError::NoAdmissiblePlan(_)
                | HipError::Format(_)
                | HipError::Io(_)
                | HipError::GridMismatch { .. }
                | HipError::NotPositive { .. } => 2,
                _ => 4,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Output(err.to_string())
    }
}
