//! Reconstruction map from the delay embedding to the full state.
//!
//! Trained on true data only; at evaluation time it is composed with model
//! rollouts (whose `Rollout::embeddings` rows feed straight into
//! [`recon_apply`]), which keeps time-stepping error and reconstruction error
//! separable.

use ndarray::{Array2, ArrayView2};

use crate::embedding::{
    apply_blockwise, build_embedding, normalize_invert, EmbeddingSpec, Normalization,
    ObservationSpec, TargetMode,
};
use crate::error::{Error, Result};
use crate::models::dts::batched_forward;
use crate::nn::{train_supervised, Mlp, TrainConfig, TrainHistory};
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone)]
pub struct ReconModel {
    /// m * d_p -> d_o, acts on normalized coordinates.
    pub net: Mlp,
    pub spec: EmbeddingSpec,
    pub obs: ObservationSpec,
    pub input_norm: Normalization,
    /// Per-full-state-channel stats.
    pub output_norm: Normalization,
}

#[derive(Debug, Clone)]
pub struct ReconTrainOptions {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub normalize: bool,
}

#[derive(Debug)]
pub struct ReconTrainResult {
    pub model: ReconModel,
    pub history: TrainHistory,
    /// Test MSE in raw physical units over the full-state channels.
    pub test_mse_raw: f64,
}

/// Trains the map embedding(t) -> u(t) from a time-aligned (partial, full)
/// pair of series.
pub fn recon_train(
    partial: &TimeSeries,
    full: &TimeSeries,
    spec: &EmbeddingSpec,
    obs: &ObservationSpec,
    opts: &ReconTrainOptions,
) -> Result<ReconTrainResult> {
    let mut ds = build_embedding(partial, spec, TargetMode::FullState { full })?;
    if opts.normalize {
        ds.normalize_in_place()?;
    } else {
        ds.input_norm = Some(Normalization::identity(ds.d_p));
        ds.target_norm = Some(Normalization::identity(full.n_channels()));
    }
    let mut net = Mlp::relu_net(spec.m * ds.d_p, &opts.hidden, full.n_channels(), opts.train.seed)?;
    let history = train_supervised(&mut net, &ds, &opts.train)?;
    let model = ReconModel {
        net,
        spec: *spec,
        obs: obs.clone(),
        input_norm: ds.input_norm.clone().unwrap(),
        output_norm: ds.target_norm.clone().unwrap(),
    };
    let test_mse_raw = model.test_mse(partial, full)?;
    Ok(ReconTrainResult { model, history, test_mse_raw })
}

impl ReconModel {
    pub fn embedding_dim(&self) -> usize {
        self.spec.m * self.obs.dim()
    }

    /// Raw-unit test MSE over the chronological held-out split.
    pub fn test_mse(&self, partial: &TimeSeries, full: &TimeSeries) -> Result<f64> {
        let ds = build_embedding(partial, &self.spec, TargetMode::FullState { full })?;
        let (train_end, n) = crate::embedding::split_chronological(ds.n_pairs());
        let pred = recon_apply(self, &ds.inputs.slice(ndarray::s![train_end..n, ..]))?;
        let target = ds.targets.slice(ndarray::s![train_end..n, ..]);
        Ok(crate::nn::mse(&pred.view(), &target))
    }
}

/// Maps raw embedding rows to raw full-state rows.
pub fn recon_apply(model: &ReconModel, embeddings: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if embeddings.ncols() != model.embedding_dim() {
        return Err(Error::ShapeMismatch(format!(
            "embeddings have width {}, model expects {}",
            embeddings.ncols(),
            model.embedding_dim()
        )));
    }
    let mut x = embeddings.to_owned();
    apply_blockwise(&mut x, &model.input_norm);
    let y = batched_forward(&model.net, &x)?;
    normalize_invert(&y.view(), &model.output_norm)
}
