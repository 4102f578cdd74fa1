use noisy_ergodic::Error;

/// Every way a command can end other than success, with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{failed} check(s) failed")]
    ChecksFailed { failed: usize },
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::ChecksFailed { .. } => 1,
            Failure::Config(_) | Failure::Io(_) => 2,
            Failure::Kernel(_) => 3,
            Failure::Core(e) => match e {
                Error::InvalidKernel(_) => 3,
                Error::Convergence { .. } => 4,
                Error::Precondition(_) | Error::NotStationary { .. } => 5,
                _ => 2,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::ChecksFailed { .. } => "checks_failed",
            Failure::Config(_) => "config",
            Failure::Io(_) => "io",
            Failure::Kernel(_) => "invalid_kernel",
            Failure::Core(e) => match e {
                Error::InvalidKernel(_) => "invalid_kernel",
                Error::Convergence { .. } => "convergence",
                Error::Precondition(_) => "precondition",
                Error::NotStationary { .. } => "not_stationary",
                _ => "invalid_argument",
            },
        }
    }

    /// Residual of a failed solve, recorded in reports.
    pub fn residual(&self) -> Option<f64> {
        match self {
            Failure::Core(Error::Convergence { residual, .. }) => Some(*residual),
            Failure::Core(Error::NotStationary { residual, .. }) => Some(*residual),
            _ => None,
        }
    }
}
