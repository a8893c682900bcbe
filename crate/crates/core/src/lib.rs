//! Multidimensional time-series forecasting by low-rank tensor completion.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense row-major tensors and block-circulant reference operators
//! - [`tsvd`]: trailing-mode DFT, t-product, t-SVD, tensor nuclear norm, t-SVT
//! - [`sampling`]: observation masks and sub-tensor sampling ratios
//! - [`temporal_conv`]: the temporal convolution tensor and its pseudo-inverse
//! - [`theory`]: incoherence and recovery/prediction diagnostics
//! - [`solver`]: ADMM solvers for TNN, TCTNN and TCMNN, and the forecast wrapper
//! - [`io`], [`synth`], [`metrics`]: file formats, synthetic data and error metrics
//! - [`desk`]: the desk-scale verification suite

pub mod error;
pub mod tensor;
pub mod tsvd;
pub mod sampling;
pub mod temporal_conv;
pub mod theory;
pub mod solver;
pub mod io;
pub mod synth;
pub mod metrics;
pub mod desk;

pub use error::{Error, Result};
pub use tensor::{ComplexTensor, DenseTensor, Shape};
