//! Minibatch supervised training with a step learning-rate schedule.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{split_chronological, DelayDataset};
use crate::error::{Error, Result};
use crate::nn::adam::{adam_step, AdamHyper, AdamState};
use crate::nn::mlp::Mlp;

/// Offset mixed into the seed for the shuffle stream so data order is
/// independent of the initialization stream.
const SHUFFLE_STREAM: u64 = 0x5348_5546; // "SHUF"

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.lr_decay_every == 0 {
            return Err(Error::invalid("batch_size and lr_decay_every must be positive".to_string()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::invalid(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::invalid(format!(
                "lr_decay_factor must be in (0, 1], got {}",
                self.lr_decay_factor
            )));
        }
        Ok(())
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr0 * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_train_mse(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_mse)
    }

    pub fn final_test_mse(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test_mse)
    }
}

/// Mean squared error over all elements.
pub fn mse(pred: &ArrayView2<'_, f64>, target: &ArrayView2<'_, f64>) -> f64 {
    let n = pred.len() as f64;
    pred.iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n
}

/// Batched forward MSE evaluation (no gradient), chunked to bound memory.
pub fn eval_mse(net: &Mlp, inputs: &ArrayView2<'_, f64>, targets: &ArrayView2<'_, f64>) -> Result<f64> {
    let chunk = 4096;
    let n = inputs.nrows();
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let x = inputs.slice(ndarray::s![start..end, ..]);
        let t = targets.slice(ndarray::s![start..end, ..]);
        let y = net.forward_batch(&x)?;
        acc += y
            .iter()
            .zip(t.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        count += y.len();
        start = end;
    }
    Ok(acc / count as f64)
}

/// Trains `net` on the dataset's chronological 80/20 split with Adam and MSE.
/// The dataset must already be normalized. Per-epoch train MSE is the mean of
/// the minibatch losses seen during the epoch; test MSE is evaluated on the
/// held-out split after each epoch.
pub fn train_supervised(
    net: &mut Mlp,
    dataset: &DelayDataset,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if dataset.input_norm.is_none() || dataset.target_norm.is_none() {
        return Err(Error::invalid(
            "dataset must be normalized before training (call normalize_in_place)".to_string(),
        ));
    }
    train_on_arrays(net, &dataset.inputs.view(), &dataset.targets.view(), config)
}

/// Training core on raw arrays; split is chronological over the rows.
pub fn train_on_arrays(
    net: &mut Mlp,
    inputs: &ArrayView2<'_, f64>,
    targets: &ArrayView2<'_, f64>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if inputs.nrows() != targets.nrows() || inputs.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} input rows vs {} target rows",
            inputs.nrows(),
            targets.nrows()
        )));
    }
    let (train_end, n) = split_chronological(inputs.nrows());
    let test_range = train_end..n;

    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok(history);
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut state = AdamState::new(net, AdamHyper::default());
    let mut order: Vec<usize> = (0..train_end).collect();

    for epoch in 0..config.epochs {
        let lr = config.lr_at_epoch(epoch);
        order.shuffle(&mut shuffle_rng);
        let mut loss_acc = 0.0;
        let mut batch_count = 0usize;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let x = gather_rows(inputs, batch);
            let t = gather_rows(targets, batch);
            let y = net.forward_batch(&x.view())?;
            let loss = mse(&y.view(), &t.view());
            if !loss.is_finite() {
                return Err(Error::NanLoss { epoch, batch: batch_idx });
            }
            loss_acc += loss;
            batch_count += 1;
            let scale = 2.0 / y.len() as f64;
            let mut grad_out = &y - &t;
            grad_out.mapv_inplace(|v| v * scale);
            let grads = net.backward_batch(&x.view(), &grad_out.view())?;
            adam_step(net, &grads, &mut state, lr);
        }
        let train_mse = loss_acc / batch_count.max(1) as f64;
        let test_mse = if test_range.is_empty() {
            f64::NAN
        } else {
            eval_mse(
                net,
                &inputs.slice(ndarray::s![test_range.clone(), ..]),
                &targets.slice(ndarray::s![test_range.clone(), ..]),
            )?
        };
        history.epochs.push(EpochStats { epoch, train_mse, test_mse, lr });
    }
    Ok(history)
}

pub(crate) fn gather_rows(data: &ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), data.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.index_axis_mut(Axis(0), r).assign(&data.row(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{build_embedding, EmbeddingSpec, TargetMode};
    use crate::nn::mlp::Activation;
    use crate::timeseries::TimeSeries;
    use ndarray::Array2;

    #[test]
    fn zero_epochs_returns_unchanged_net_and_empty_history() {
        let net0 = Mlp::relu_net(1, &[4], 1, 0).unwrap();
        let mut net = net0.clone();
        let inputs = Array2::from_shape_fn((50, 1), |(i, _)| i as f64 * 0.01);
        let targets = inputs.clone();
        let cfg = TrainConfig {
            epochs: 0,
            batch_size: 8,
            lr0: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 100,
            seed: 0,
        };
        let h = train_on_arrays(&mut net, &inputs.view(), &targets.view(), &cfg).unwrap();
        assert!(h.epochs.is_empty());
        assert_eq!(net, net0);
    }

    #[test]
    fn linear_regression_converges() {
        // y = 2x with a single linear unit: convex, should reach ~exact fit.
        let inputs = Array2::from_shape_fn((200, 1), |(i, _)| (i as f64 / 100.0) - 1.0);
        let targets = inputs.mapv(|v| 2.0 * v);
        let mut net = Mlp::init(&[1, 1], &[Activation::Linear], 1).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 32,
            lr0: 0.05,
            lr_decay_factor: 1.0,
            lr_decay_every: 100,
            seed: 1,
        };
        let h = train_on_arrays(&mut net, &inputs.view(), &targets.view(), &cfg).unwrap();
        let final_mse = h.final_train_mse().unwrap();
        assert!(final_mse < 1e-10, "final mse {final_mse}");
        assert!((net.weights[0][[0, 0]] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn learning_rate_schedule_steps() {
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: 8,
            lr0: 0.001,
            lr_decay_factor: 0.5,
            lr_decay_every: 100,
            seed: 0,
        };
        assert_eq!(cfg.lr_at_epoch(0), 0.001);
        assert_eq!(cfg.lr_at_epoch(99), 0.001);
        assert_eq!(cfg.lr_at_epoch(100), 0.0005);
        assert_eq!(cfg.lr_at_epoch(250), 0.00025);
    }

    #[test]
    fn unnormalized_dataset_rejected() {
        let data: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let ts = TimeSeries::new(Array2::from_shape_vec((50, 1), data).unwrap(), 1.0, 0.0).unwrap();
        let spec = EmbeddingSpec::new(2, 1, 1.0).unwrap();
        let ds = build_embedding(&ts, &spec, TargetMode::NextPartial { horizon_stride: 1 }).unwrap();
        let mut net = Mlp::relu_net(2, &[4], 1, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 8,
            lr0: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 100,
            seed: 0,
        };
        assert!(train_supervised(&mut net, &ds, &cfg).is_err());
    }

    #[test]
    fn fixed_seed_bitwise_reproducible() {
        let run = || {
            let inputs = Array2::from_shape_fn((128, 2), |(i, j)| ((i * 2 + j) as f64 * 0.17).sin());
            let targets = Array2::from_shape_fn((128, 1), |(i, _)| ((i as f64) * 0.11).cos());
            let mut net = Mlp::relu_net(2, &[8], 1, 42).unwrap();
            let cfg = TrainConfig {
                epochs: 5,
                batch_size: 16,
                lr0: 1e-3,
                lr_decay_factor: 0.5,
                lr_decay_every: 3,
                seed: 42,
            };
            let h = train_on_arrays(&mut net, &inputs.view(), &targets.view(), &cfg).unwrap();
            h.epochs.iter().map(|e| e.train_mse.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
