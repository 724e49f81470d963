use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShadowError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what} needs {size} terms, above the limit of {limit}")]
    GuardExceeded { what: String, size: f64, limit: f64 },
    #[error("shadow inverter is tomography-incomplete: {0}")]
    Incomplete(String),
    #[error("finite-time superoperator is singular (condition number {0:.3e})")]
    SingularSuperoperator(f64),
    #[error("Born distribution sums to 1 {0:+.3e}")]
    BornNormalization(f64),
    #[error("unsupported observable: {0}")]
    UnsupportedObservable(String),
    #[error("X_H has a zero off-diagonal element at ({0}, {1})")]
    ZeroOffDiagonal(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("Hamiltonian fingerprint mismatch: snapshots carry {found}, inverter has {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("snapshot file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ShadowError>;

pub(crate) fn guard(what: &str, size: f64, limit: f64) -> Result<()> {
    if size > limit {
        return Err(ShadowError::GuardExceeded { what: what.to_string(), size, limit });
    }
    Ok(())
}
