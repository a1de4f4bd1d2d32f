//! The DAE-PCA network: encoder, fixed batch normalization, a Cayley
//! parameterized PCA module, an inverse-BN layer and a mirrored decoder.
//!
//! The PCA module keeps `P` orthonormal by construction: `P` is the first
//! `a` columns of the Cayley image of a skew-symmetric matrix built from the
//! trainable `M₀`, so orthogonality holds at every step instead of being
//! encouraged by a penalty.

mod config;
mod io;
mod model;
mod network;
mod train;

pub use config::{LossWeights, NetworkConfig, Variant};
pub use io::{decode_model, encode_model, load_model, save_model, sidecar_path, MAGIC};
pub use model::DaePcaModel;
pub use network::{
    cayley_projection, cayley_tape, loss_tape, loss_total, orthogonality_error, tensor_shapes,
    LossTerms, Network, TapeForward, TapeLoss, M0_INIT_SCALE,
};
pub use train::{train, Checkpoint, TrainReport};
