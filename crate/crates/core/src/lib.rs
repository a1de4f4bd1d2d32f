//! Nonlinear process monitoring: DAE-PCA, a trainable replacement for kernel
//! PCA, together with PCA/KPCA baselines and a fault-detection harness.

pub mod autodiff;
pub mod daepca;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod monitor;
pub mod numerics;
pub mod subspace;

pub use error::{Error, Result};
