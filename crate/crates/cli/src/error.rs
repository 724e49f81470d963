use hshadow::ShadowError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("incomplete Hamiltonian:\n{0}")]
    Incomplete(String),
    #[error("{0}")]
    FingerprintMismatch(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Incomplete(_) => 3,
            CliError::FingerprintMismatch(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ShadowError> for CliError {
    fn from(e: ShadowError) -> Self {
        match e {
            ShadowError::FingerprintMismatch { .. } => CliError::FingerprintMismatch(e.to_string()),
            ShadowError::Incomplete(msg) => CliError::Incomplete(msg),
            ShadowError::ZeroOffDiagonal(..) | ShadowError::SingularSuperoperator(_) => CliError::Incomplete(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
