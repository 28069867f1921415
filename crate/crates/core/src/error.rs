use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// The CLI maps these onto process exit codes, so new variants must be
/// classified in [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max |M - M^dagger| = {0:e})")]
    NonHermitian(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("Kronecker product dimension {0} exceeds the supported maximum of 16")]
    DimOverflow(usize),

    #[error("invalid matrix shape: {0}")]
    BadShape(String),

    #[error("not a density matrix: {0}")]
    InvalidState(String),

    #[error("non-physical parameters: {0}")]
    NonPhysical(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("measure hierarchy violated: {0}")]
    HierarchyViolation(String),

    #[error("|11> population {0:e} exceeds 1e-6; state is not a qutrit embedding")]
    ElevenPopulated(f64),

    #[error("phase-space grid of {0} points exceeds the limit of 10^6")]
    GridTooLarge(usize),

    #[error("missing record: {0}")]
    MissingRecord(String),

    #[error("maximum-likelihood iteration did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("visibility sweep {0} has fewer than two records")]
    EmptySweep(String),

    #[error("block estimate cannot be repaired: {0}")]
    IrreparableBlock(String),

    #[error("curve has {0} points; at least 5 are required")]
    CurveTooShort(usize),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingRecord(_) | Error::EmptySweep(_) => 4,
            Error::NonConvergence(_) => 5,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
