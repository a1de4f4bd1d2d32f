//! Classical baselines: linear PCA and kernel PCA.

mod kernel;
mod kpca;
mod pca;

pub use kernel::{kernel_eval, KernelConfig, TE_RBF_WIDTH};
pub use kpca::{center_gram, fit_kpca, KpcaModel, RANK_TOLERANCE};
pub use pca::{fit_pca, PcaModel};
