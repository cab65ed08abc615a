//! The three learned maps: discrete-time stepper, continuous-time flow, and
//! full-state reconstruction.

pub mod dts;
pub mod io;
pub mod node;
pub mod recon;

pub use dts::{dts_rollout, dts_train, true_embeddings, DtsModel, DtsTrainOptions};
pub use io::{load_model, save_dts, save_node, save_recon, AnyModel, ModelKind};
pub use node::{node_integrate, node_loss_prime, node_train, NodeModel, NodeTrainOptions};
pub use recon::{recon_apply, recon_train, ReconModel, ReconTrainOptions};

use ndarray::Array2;

use crate::embedding::EmbeddingSpec;
use crate::error::Result;
use crate::timeseries::TimeSeries;

/// Rollouts terminate once the normalized state magnitude exceeds this, i.e.
/// 10^3 times the training-data scale.
pub const DIVERGENCE_SENTINEL: f64 = 1e3;

/// A model trajectory: the partial observable on a uniform grid plus the
/// full embedding state at every emitted sample (raw physical units).
/// `series` row 0 / `embeddings` row 0 hold the initial condition.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub series: TimeSeries,
    pub embeddings: Array2<f64>,
    /// Step index at which the divergence sentinel tripped, if it did; the
    /// series is truncated there.
    pub diverged_at: Option<usize>,
}

impl Rollout {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Anything that can advance an initial delay embedding forward in time and
/// report the trajectory of the partial observable.
pub trait Forecaster {
    fn spec(&self) -> &EmbeddingSpec;
    fn obs_dim(&self) -> usize;
    /// Forecasts `n_steps` steps of size `step_dt` from the raw embedding
    /// `u_d0`. Discrete-time models only support `step_dt == spec.tau`.
    fn forecast(&self, u_d0: &[f64], n_steps: usize, step_dt: f64) -> Result<Rollout>;
}
