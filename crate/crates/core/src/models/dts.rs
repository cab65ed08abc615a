//! Discrete-time stepper: advances the newest embedding block by one delay
//! spacing and shifts the register, so after m steps the embedding holds only
//! predicted values.

use ndarray::Array2;

use crate::embedding::{
    apply_vec, build_embedding, embed_series, invert_vec, normalize_invert, EmbeddingSpec,
    Normalization, ObservationSpec, TargetMode,
};
use crate::error::{Error, Result};
use crate::models::{Forecaster, Rollout, DIVERGENCE_SENTINEL};
use crate::nn::{train_supervised, Mlp, TrainConfig, TrainHistory};
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone)]
pub struct DtsModel {
    /// m * d_p inputs, d_p outputs, acts on normalized coordinates.
    pub net: Mlp,
    pub spec: EmbeddingSpec,
    pub obs: ObservationSpec,
    pub input_norm: Normalization,
    pub target_norm: Normalization,
}

#[derive(Debug, Clone)]
pub struct DtsTrainOptions {
    /// Hidden-layer widths (ReLU); input/output sizes come from the embedding.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Standardize inputs/targets before training (kept switchable for
    /// raw-unit ablations).
    pub normalize: bool,
}

#[derive(Debug)]
pub struct DtsTrainResult {
    pub model: DtsModel,
    pub history: TrainHistory,
    /// One-step test MSE in raw physical units.
    pub test_mse_raw: f64,
}

/// Trains the one-step map u_p(t) -> u_p(t + tau) on a partial series.
pub fn dts_train(
    data: &TimeSeries,
    spec: &EmbeddingSpec,
    obs: &ObservationSpec,
    opts: &DtsTrainOptions,
) -> Result<DtsTrainResult> {
    let mut ds = build_embedding(data, spec, TargetMode::NextPartial { horizon_stride: spec.n_stride })?;
    if opts.normalize {
        ds.normalize_in_place()?;
    } else {
        let d_p = ds.d_p;
        ds.input_norm = Some(Normalization::identity(d_p));
        ds.target_norm = Some(Normalization::identity(d_p));
    }
    let d_p = ds.d_p;
    let mut net = Mlp::relu_net(spec.m * d_p, &opts.hidden, d_p, opts.train.seed)?;
    let history = train_supervised(&mut net, &ds, &opts.train)?;

    let model = DtsModel {
        net,
        spec: *spec,
        obs: obs.clone(),
        input_norm: ds.input_norm.clone().unwrap(),
        target_norm: ds.target_norm.clone().unwrap(),
    };
    let test_mse_raw = model.one_step_test_mse(data)?;
    Ok(DtsTrainResult { model, history, test_mse_raw })
}

impl DtsModel {
    pub fn embedding_dim(&self) -> usize {
        self.spec.m * self.obs.dim()
    }

    /// Normalized one-step prediction for a normalized embedding row.
    fn step_normalized(&self, emb: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(emb)
    }

    /// One-step test MSE in raw units over the chronological test split of a
    /// partial series.
    pub fn one_step_test_mse(&self, data: &TimeSeries) -> Result<f64> {
        let ds = build_embedding(
            data,
            &self.spec,
            TargetMode::NextPartial { horizon_stride: self.spec.n_stride },
        )?;
        let (train_end, n) = crate::embedding::split_chronological(ds.n_pairs());
        let inputs = ds.inputs.slice(ndarray::s![train_end..n, ..]).to_owned();
        let targets = ds.targets.slice(ndarray::s![train_end..n, ..]);

        let mut x = inputs;
        crate::embedding::apply_blockwise(&mut x, &self.input_norm);
        let pred_n = batched_forward(&self.net, &x)?;
        let pred = normalize_invert(&pred_n.view(), &self.target_norm)?;
        Ok(crate::nn::mse(&pred.view(), &targets))
    }
}

pub(crate) fn batched_forward(net: &Mlp, x: &Array2<f64>) -> Result<Array2<f64>> {
    let chunk = 4096;
    let n = x.nrows();
    let mut out = Array2::zeros((n, net.output_dim()));
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let y = net.forward_batch(&x.slice(ndarray::s![start..end, ..]))?;
        out.slice_mut(ndarray::s![start..end, ..]).assign(&y);
        start = end;
    }
    Ok(out)
}

/// Iterative forecast: each step feeds the prediction back into the shift
/// register (newest block first). Output row 0 is the initial observation.
pub fn dts_rollout(model: &DtsModel, u_d0: &[f64], n_steps: usize) -> Result<Rollout> {
    let width = model.embedding_dim();
    if u_d0.len() != width {
        return Err(Error::ShapeMismatch(format!(
            "initial embedding has {} entries, model expects {width}",
            u_d0.len()
        )));
    }
    let d_p = model.obs.dim();
    let mut emb = u_d0.to_vec();
    apply_vec(&mut emb, &model.input_norm);

    let mut emb_rows: Vec<f64> = Vec::with_capacity((n_steps + 1) * width);
    let mut raw0 = emb.clone();
    invert_vec(&mut raw0, &model.input_norm);
    emb_rows.extend_from_slice(&raw0);

    let mut diverged_at = None;
    for step in 1..=n_steps {
        let pred = model.step_normalized(&emb)?;
        if pred.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_SENTINEL) {
            diverged_at = Some(step);
            break;
        }
        // Shift register: drop the oldest block, prepend the prediction.
        // Prediction is in target-normalized units; carry it into
        // input-normalized units before it re-enters the embedding.
        let mut new_emb = Vec::with_capacity(width);
        for c in 0..d_p {
            let raw = pred[c] * model.target_norm.scale[c] + model.target_norm.mean[c];
            new_emb.push((raw - model.input_norm.mean[c]) / model.input_norm.scale[c]);
        }
        new_emb.extend_from_slice(&emb[..width - d_p]);
        emb = new_emb;

        let mut raw = emb.clone();
        invert_vec(&mut raw, &model.input_norm);
        emb_rows.extend_from_slice(&raw);
    }

    let n_rows = emb_rows.len() / width;
    let embeddings = Array2::from_shape_vec((n_rows, width), emb_rows)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let partial = embeddings.slice(ndarray::s![.., ..d_p]).to_owned();
    let series = TimeSeries::new(partial, model.spec.tau, 0.0)?;
    Ok(Rollout { series, embeddings, diverged_at })
}

impl Forecaster for DtsModel {
    fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    fn obs_dim(&self) -> usize {
        self.obs.dim()
    }

    fn forecast(&self, u_d0: &[f64], n_steps: usize, step_dt: f64) -> Result<Rollout> {
        if (step_dt - self.spec.tau).abs() > 1e-9 * self.spec.tau {
            return Err(Error::invalid(format!(
                "discrete-time model steps at tau = {}, requested {step_dt}",
                self.spec.tau
            )));
        }
        dts_rollout(self, u_d0, n_steps)
    }
}

/// Embeddings of a true partial series, as rows usable with the models and
/// the reconstruction map (raw units).
pub fn true_embeddings(data: &TimeSeries, spec: &EmbeddingSpec) -> Result<Array2<f64>> {
    Ok(embed_series(data, spec)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn identity_model(m: usize) -> DtsModel {
        // Linear net returning the newest block unchanged: constant rollout.
        let mut net = Mlp::init(&[m, 1], &[Activation::Linear], 0).unwrap();
        net.zero_params();
        net.weights[0][[0, 0]] = 1.0;
        DtsModel {
            net,
            spec: EmbeddingSpec { m, n_stride: 1, tau: 0.1 },
            obs: ObservationSpec::new(vec![0]).unwrap(),
            input_norm: Normalization::identity(1),
            target_norm: Normalization::identity(1),
        }
    }

    #[test]
    fn identity_stepper_gives_constant_rollout() {
        let model = identity_model(3);
        let r = dts_rollout(&model, &[2.0, 2.0, 2.0], 5).unwrap();
        assert!(!r.diverged());
        assert_eq!(r.series.n_samples(), 6);
        for i in 0..6 {
            assert_eq!(r.series.values[[i, 0]], 2.0);
        }
    }

    #[test]
    fn zero_steps_returns_initial_observation_only() {
        let model = identity_model(3);
        let r = dts_rollout(&model, &[7.0, 1.0, -4.0], 0).unwrap();
        assert_eq!(r.series.n_samples(), 1);
        assert_eq!(r.series.values[[0, 0]], 7.0);
    }

    #[test]
    fn shift_register_contains_only_predictions_after_m_steps() {
        // Constant-output net: after m steps every block must equal that
        // constant, no raw data left.
        let m = 4;
        let mut net = Mlp::init(&[m, 1], &[Activation::Linear], 0).unwrap();
        net.zero_params();
        net.biases[0][0] = 9.5;
        let model = DtsModel {
            net,
            spec: EmbeddingSpec { m, n_stride: 1, tau: 0.1 },
            obs: ObservationSpec::new(vec![0]).unwrap(),
            input_norm: Normalization::identity(1),
            target_norm: Normalization::identity(1),
        };
        let r = dts_rollout(&model, &[1.0, 2.0, 3.0, 4.0], m).unwrap();
        let last = r.embeddings.row(m);
        for v in last {
            assert_eq!(*v, 9.5);
        }
    }

    #[test]
    fn divergence_sentinel_truncates() {
        // Doubling map leaves the sentinel quickly.
        let m = 1;
        let mut net = Mlp::init(&[m, 1], &[Activation::Linear], 0).unwrap();
        net.zero_params();
        net.weights[0][[0, 0]] = 2.0;
        let model = DtsModel {
            net,
            spec: EmbeddingSpec { m, n_stride: 1, tau: 0.1 },
            obs: ObservationSpec::new(vec![0]).unwrap(),
            input_norm: Normalization::identity(1),
            target_norm: Normalization::identity(1),
        };
        let r = dts_rollout(&model, &[1.0], 100).unwrap();
        assert!(r.diverged());
        assert!(r.series.n_samples() < 101);
    }

    #[test]
    fn forecast_rejects_wrong_step() {
        let model = identity_model(2);
        assert!(model.forecast(&[1.0, 1.0], 3, 0.25).is_err());
        assert!(model.forecast(&[1.0, 1.0], 3, 0.1).is_ok());
    }
}
