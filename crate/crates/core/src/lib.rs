//! Frequency-bias analysis and tuning for diagonal state-space LTI layers.
//!
//! The crate is organized bottom-up:
//!
//! - [`transfer`]: the partial-fraction LTI model, its complex / real / Sobolev
//!   filtered transfer functions, total variation and the analytic tail bounds.
//! - [`init`]: alpha-scaled HiPPO initialization, bilinear frequency nodes and
//!   the discretization scaling laws.
//! - [`spectral`]: the FFT multiply-inverse pipeline and pass rates.
//! - [`grad`]: gradient kernels, quadrature gradients and a finite-difference
//!   oracle.
//! - [`flow`]: the single-pole gradient-flow experiments.
//! - [`seqtrain`]: a small trainable sequence model with analytic backprop.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is on and runs serially otherwise. Reductions use a
//! fixed chunking so both modes give bit-identical results.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod flow;
pub mod grad;
pub mod init;
pub mod seqtrain;
pub mod spectral;
pub mod transfer;

pub use error::{Error, Result};
pub use exec::Exec;
pub use init::{FrequencyGrid, FrequencyNode, InitConfig, ScalingReport};
pub use spectral::{SequenceSignal, SobolevFilter};
pub use transfer::{DiagonalLti, FrequencyWindow, TailSide};
