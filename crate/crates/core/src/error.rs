use thiserror::Error;

/// Every failure the numerical pipeline can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HolonomyError {
    #[error("matrix is not unitary (defect {defect:.3e} > tol {tol:.3e})")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("matrix is not Hermitian (defect {defect:.3e} > tol {tol:.3e})")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("overlap matrix is singular (smallest singular value {sigma_min:.3e}); refine the grid or avoid the band crossing")]
    SingularOverlap { sigma_min: f64 },

    #[error("model {0} does not support this operation")]
    UnsupportedModel(String),

    #[error("ambiguous band assignment on segment {segment}: {detail}")]
    BandCrossing { segment: usize, detail: String },

    #[error("loop is not closed: {0}")]
    LoopNotClosed(String),

    #[error("degenerate block structure changes along the loop at segment {segment}")]
    BlockMismatch { segment: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("quasienergy gap closes (E = {e:.3e})")]
    GapClosed { e: f64 },

    #[error("no candidate phase convention satisfies the eigenvalue equation (best residual {best_residual:.3e})")]
    ThetaResolutionFailure { best_residual: f64 },

    #[error("no closed form for this model/loop: {0}")]
    UnsupportedLoop(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl HolonomyError {
    /// Stable machine-readable tag, used in serialized error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            HolonomyError::NotUnitary { .. } => "NotUnitary",
            HolonomyError::NotHermitian { .. } => "NotHermitian",
            HolonomyError::ConvergenceFailure(_) => "ConvergenceFailure",
            HolonomyError::SingularOverlap { .. } => "SingularOverlap",
            HolonomyError::UnsupportedModel(_) => "UnsupportedModel",
            HolonomyError::BandCrossing { .. } => "BandCrossing",
            HolonomyError::LoopNotClosed(_) => "LoopNotClosed",
            HolonomyError::BlockMismatch { .. } => "BlockMismatch",
            HolonomyError::DimensionMismatch { .. } => "DimensionMismatch",
            HolonomyError::GapClosed { .. } => "GapClosed",
            HolonomyError::ThetaResolutionFailure { .. } => "ThetaResolutionFailure",
            HolonomyError::UnsupportedLoop(_) => "UnsupportedLoop",
            HolonomyError::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, HolonomyError>;
