use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape {0:?}: every dimension must be at least 1")]
    InvalidShape([usize; 3]),

    #[error("data length {got} does not match dimensions {dims:?}")]
    DataLength { dims: [usize; 3], got: usize },

    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),

    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e} after inverse transform")]
    SymmetryViolation { residue: f64, tolerance: f64 },

    #[error("dense oracle needs {required} entries, budget is {budget}")]
    SizeLimit { required: usize, budget: usize },

    #[error("truncation term {k} out of range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },

    #[error("iteration vector has length {got}, expected {expected}")]
    IterationVectorLength { expected: usize, got: usize },

    #[error("iteration counts of conjugate slices {slice} and {mirror} differ")]
    AsymmetricIterations { slice: usize, mirror: usize },

    #[error("tolerance eps = {0} must lie in (0, 1)")]
    InvalidEpsilon(f64),

    #[error("oversampling p = {0} is too small for the error bounds (need p >= 2)")]
    OversamplingTooSmall(usize),

    #[error("failure probability delta = {0} must lie in (0, 1)")]
    InvalidDelta(f64),

    #[error("projected sketch V1^H W is not of full row rank; resample")]
    RankDeficientSketch,

    #[error("{samples} samples cannot be split into {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },
}

impl Error {
    pub(crate) fn mismatch(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }
}
