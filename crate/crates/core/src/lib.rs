//! t-product algebra for real third-order tensors and randomized t-SVD.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense storage, tube-wise DFT, block-circulant matricization
//! * [`tprod`]: t-product, transpose, identity, t-QR and structural predicates
//! * [`tsvd`]: deterministic truncated t-SVD and the optimal truncation error
//! * [`randomized`]: Gaussian sketches, matrix r-SVD, randomized t-SVD with
//!   per-slice subspace iteration and the adaptive iteration rule
//! * [`bounds`]: expected, tail and structural error bounds
//! * [`recognition`]: training, classification and cross-validation for
//!   images stored as lateral slices
//!
//! Fourier-domain work is a map over independent frontal slices and runs on
//! an [`Executor`]; results never depend on its worker count.

pub mod bounds;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod randomized;
pub mod recognition;
pub mod tensor;
pub mod tprod;
pub mod tsvd;

pub use error::{Error, Result};
pub use exec::Executor;
pub use randomized::{
    choose_iterations, gaussian_random_tensor, rsvd_matrix, rtsvd, rtsvd_subspace, subspace_range_matrix,
    ErrorReport, Iterations, LowRank, Sketch, SketchConfig,
};
pub use recognition::{
    classify, train, CVReport, CvConfig, FaceDataset, MeanShift, Method, RecognitionModel,
};
pub use tensor::{
    block_circulant, fft_mode3, frobenius_norm, ifft_mode3, CMat, FourierTensor3, Tensor3,
};
pub use tprod::{identity_tensor, is_f_diagonal, is_orthogonal, t_qr, tprod, tprod_naive, ttranspose};
pub use tsvd::{optimal_error, reconstruct, singular_spectrum, tsvd_truncated, SigmaHat, TSVDFactors};
