//! Dense networks, reverse-mode gradients, Adam, and serialization.

pub mod adam;
pub mod io;
pub mod mlp;
pub mod train;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use io::{mlp_load, mlp_save, sha256_hex};
pub use mlp::{Activation, Gradients, Mlp};
pub use train::{eval_mse, mse, train_on_arrays, train_supervised, EpochStats, TrainConfig, TrainHistory};
