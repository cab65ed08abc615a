//! Partial observations and delay-coordinate datasets.
//!
//! An embedding stacks the current observation with its m-1 delayed copies,
//! newest first: u_d(t) = [u_p(t), u_p(t - tau), ..., u_p(t - (m-1) tau)].
//! Flattened input column j*d_p + c holds channel c delayed by j strides.
//! That newest-first order is fixed here and recorded in serialized models.

mod fnn;
mod mi;
mod norm;

pub use fnn::{
    false_nearest_neighbors, false_nearest_neighbors_capped, DEFAULT_ATOL_FNN, DEFAULT_FNN_SUBSAMPLE,
    DEFAULT_RTOL_FNN,
};
pub use mi::{first_minimum, mutual_information, DEFAULT_MI_BINS};
pub use norm::{normalize_apply, normalize_fit, normalize_invert, Normalization};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{bytes_to_f64, read_json, sibling_paths, write_json, TimeSeries};
use std::path::Path;

/// Chronological train fraction used everywhere: the first 80% of pairs
/// train, the rest test. Never shuffled across the boundary.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Splits `n` items chronologically; returns (train_end, n).
pub fn split_chronological(n: usize) -> (usize, usize) {
    let train_end = ((n as f64) * TRAIN_FRACTION).floor() as usize;
    (train_end.max(1).min(n), n)
}

/// Which full-state channels are observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub channel_indices: Vec<usize>,
}

impl ObservationSpec {
    pub fn new(channel_indices: Vec<usize>) -> Result<Self> {
        if channel_indices.is_empty() {
            return Err(Error::invalid("observation needs at least one channel".to_string()));
        }
        let mut seen = std::collections::HashSet::new();
        for &i in &channel_indices {
            if !seen.insert(i) {
                return Err(Error::invalid(format!("duplicate channel index {i}")));
            }
        }
        Ok(ObservationSpec { channel_indices })
    }

    /// `d_p` evenly spaced grid points out of `n_grid` (used for the KSE).
    pub fn evenly_spaced(n_grid: usize, d_p: usize) -> Result<Self> {
        if d_p == 0 || d_p > n_grid || n_grid % d_p != 0 {
            return Err(Error::invalid(format!(
                "cannot place {d_p} evenly spaced observations on {n_grid} grid points"
            )));
        }
        let stride = n_grid / d_p;
        ObservationSpec::new((0..d_p).map(|i| i * stride).collect())
    }

    pub fn dim(&self) -> usize {
        self.channel_indices.len()
    }
}

/// Delay-embedding parameters. `tau` is tied to the sampling interval:
/// tau = n_stride * dt of the series being embedded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    /// Number of delays (embedding blocks).
    pub m: usize,
    /// Samples per delay.
    pub n_stride: usize,
    /// Delay spacing in time units.
    pub tau: f64,
}

impl EmbeddingSpec {
    pub fn new(m: usize, n_stride: usize, dt: f64) -> Result<Self> {
        if m < 1 || n_stride < 1 {
            return Err(Error::invalid(format!("m and n_stride must be >= 1, got m={m}, n_stride={n_stride}")));
        }
        Ok(EmbeddingSpec { m, n_stride, tau: n_stride as f64 * dt })
    }

    /// Samples consumed by the delay window: (m-1) * n_stride.
    pub fn window(&self) -> usize {
        (self.m - 1) * self.n_stride
    }

    pub fn check_dt(&self, dt: f64) -> Result<()> {
        let expect = self.n_stride as f64 * dt;
        if (expect - self.tau).abs() > 1e-12 * self.tau.abs().max(1.0) {
            return Err(Error::MisalignedSeries(format!(
                "embedding expects tau = n_stride * dt = {expect}, spec has tau = {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// How training targets are formed from the source series.
pub enum TargetMode<'a> {
    /// Target is the observation one horizon ahead: u_p(t + horizon_stride * dt).
    /// For the discrete-time stepper the horizon equals the delay stride.
    NextPartial { horizon_stride: usize },
    /// Target is the time-aligned full state u(t) from `full`.
    FullState { full: &'a TimeSeries },
    /// Targets are `n_steps` successive embeddings at one-sample spacing,
    /// for the multi-step continuous-time loss.
    EmbeddedSequence { n_steps: usize },
}

/// Supervised pairs built from a delay embedding.
#[derive(Debug, Clone)]
pub struct DelayDataset {
    /// [n_pairs x (m * d_p)], newest block first.
    pub inputs: Array2<f64>,
    /// [n_pairs x target_dim].
    pub targets: Array2<f64>,
    pub spec: EmbeddingSpec,
    /// Observation dimension d_p of the embedded series.
    pub d_p: usize,
    pub target_mode_tag: String,
    /// Per-observation-channel stats for the inputs, once fitted.
    pub input_norm: Option<Normalization>,
    /// Per-target-channel stats, once fitted.
    pub target_norm: Option<Normalization>,
}

/// Keeps the selected channels, drops the rest.
pub fn project(series: &TimeSeries, obs: &ObservationSpec) -> Result<TimeSeries> {
    for &i in &obs.channel_indices {
        if i >= series.n_channels() {
            return Err(Error::ChannelOutOfRange { index: i, n_channels: series.n_channels() });
        }
    }
    let values = Array2::from_shape_fn((series.n_samples(), obs.dim()), |(t, j)| {
        series.values[[t, obs.channel_indices[j]]]
    });
    let mut out = TimeSeries::new(values, series.dt, series.t0)?;
    if let Some(names) = &series.channel_names {
        out.channel_names = Some(obs.channel_indices.iter().map(|&i| names[i].clone()).collect());
    }
    Ok(out)
}

/// Embedding row for the state whose newest observation is sample `i`.
fn fill_embedding_row(series: &TimeSeries, spec: &EmbeddingSpec, i: usize, row: &mut [f64]) {
    let d_p = series.n_channels();
    for j in 0..spec.m {
        let src = series.values.row(i - j * spec.n_stride);
        for c in 0..d_p {
            row[j * d_p + c] = src[c];
        }
    }
}

/// All valid embeddings of a series as rows, with the sample index of the
/// newest observation for each row.
pub fn embed_series(series: &TimeSeries, spec: &EmbeddingSpec) -> Result<(Array2<f64>, Vec<usize>)> {
    spec.check_dt(series.dt)?;
    let window = spec.window();
    let n = series.n_samples();
    if n <= window {
        return Err(Error::SeriesTooShort { needed: window + 1, available: n });
    }
    let d_p = series.n_channels();
    let n_rows = n - window;
    let mut inputs = Array2::zeros((n_rows, spec.m * d_p));
    let mut indices = Vec::with_capacity(n_rows);
    for (r, i) in (window..n).enumerate() {
        fill_embedding_row(series, spec, i, inputs.row_mut(r).as_slice_mut().unwrap());
        indices.push(i);
    }
    Ok((inputs, indices))
}

/// Builds supervised (embedding, target) pairs. Pair `r` has its newest
/// observation at sample index `window + r` of the source series.
pub fn build_embedding(
    series: &TimeSeries,
    spec: &EmbeddingSpec,
    target: TargetMode<'_>,
) -> Result<DelayDataset> {
    spec.check_dt(series.dt)?;
    let window = spec.window();
    let n = series.n_samples();
    let d_p = series.n_channels();

    let horizon = match &target {
        TargetMode::NextPartial { horizon_stride } => *horizon_stride,
        TargetMode::FullState { .. } => 0,
        TargetMode::EmbeddedSequence { n_steps } => {
            if *n_steps < 1 {
                return Err(Error::invalid("embedded_sequence needs n_steps >= 1".to_string()));
            }
            *n_steps
        }
    };
    if n < window + horizon + 1 {
        return Err(Error::SeriesTooShort { needed: window + horizon + 1, available: n });
    }
    let n_pairs = n - window - horizon;

    let mut inputs = Array2::zeros((n_pairs, spec.m * d_p));
    for r in 0..n_pairs {
        fill_embedding_row(series, spec, window + r, inputs.row_mut(r).as_slice_mut().unwrap());
    }

    let (targets, tag) = match &target {
        TargetMode::NextPartial { horizon_stride } => {
            let mut t = Array2::zeros((n_pairs, d_p));
            for r in 0..n_pairs {
                let src = series.values.row(window + r + horizon_stride);
                t.row_mut(r).assign(&src);
            }
            (t, "next_partial".to_string())
        }
        TargetMode::FullState { full } => {
            if (full.dt - series.dt).abs() > 1e-12 * series.dt
                || (full.t0 - series.t0).abs() > 1e-12 * series.dt
            {
                return Err(Error::MisalignedSeries(format!(
                    "full series (dt={}, t0={}) does not align with partial (dt={}, t0={})",
                    full.dt, full.t0, series.dt, series.t0
                )));
            }
            if full.n_samples() < n {
                return Err(Error::SeriesTooShort { needed: n, available: full.n_samples() });
            }
            let d_o = full.n_channels();
            let mut t = Array2::zeros((n_pairs, d_o));
            for r in 0..n_pairs {
                t.row_mut(r).assign(&full.values.row(window + r));
            }
            (t, "full_state".to_string())
        }
        TargetMode::EmbeddedSequence { n_steps } => {
            let width = spec.m * d_p;
            let mut t = Array2::zeros((n_pairs, n_steps * width));
            for r in 0..n_pairs {
                for s in 1..=*n_steps {
                    let offset = (s - 1) * width;
                    fill_embedding_row(
                        series,
                        spec,
                        window + r + s,
                        &mut t.row_mut(r).as_slice_mut().unwrap()[offset..offset + width],
                    );
                }
            }
            (t, "embedded_sequence".to_string())
        }
    };

    Ok(DelayDataset {
        inputs,
        targets,
        spec: *spec,
        d_p,
        target_mode_tag: tag,
        input_norm: None,
        target_norm: None,
    })
}

impl DelayDataset {
    pub fn n_pairs(&self) -> usize {
        self.inputs.nrows()
    }

    /// Fits per-channel normalization on the chronological training split and
    /// rescales both inputs and targets in place. Embedding inputs share one
    /// stat set per underlying observation channel across all delay blocks.
    pub fn normalize_in_place(&mut self) -> Result<()> {
        let (train_end, _) = split_chronological(self.n_pairs());
        let input_norm = fit_embedding_norm(&self.inputs, self.d_p, train_end)?;
        let target_norm = if self.target_mode_tag == "embedded_sequence" {
            fit_embedding_norm(&self.targets, self.d_p, train_end)?
        } else {
            normalize_fit(&self.targets.slice(ndarray::s![..train_end, ..]))?
        };
        apply_blockwise(&mut self.inputs, &input_norm);
        apply_blockwise(&mut self.targets, &target_norm);
        self.input_norm = Some(input_norm);
        self.target_norm = Some(target_norm);
        Ok(())
    }

    /// Persists as a JSON header plus one raw f64le blob (inputs then targets,
    /// row-major).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (header_path, bin_path) = sibling_paths(path.as_ref());
        let header = DatasetHeader {
            n_pairs: self.n_pairs(),
            input_dim: self.inputs.ncols(),
            target_dim: self.targets.ncols(),
            spec: self.spec,
            d_p: self.d_p,
            target_mode: self.target_mode_tag.clone(),
            input_norm: self.input_norm.clone(),
            target_norm: self.target_norm.clone(),
            flattening_order: "newest_first".to_string(),
            dtype: crate::timeseries::DTYPE_F64LE.to_string(),
        };
        write_json(&header_path, &header)?;
        let mut bytes = Vec::with_capacity((self.inputs.len() + self.targets.len()) * 8);
        for v in self.inputs.iter().chain(self.targets.iter()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&bin_path, bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DelayDataset> {
        let (header_path, bin_path) = sibling_paths(path.as_ref());
        let header: DatasetHeader = read_json(&header_path)?;
        let raw = std::fs::read(&bin_path)?;
        let n_in = header.n_pairs * header.input_dim;
        let n_t = header.n_pairs * header.target_dim;
        if raw.len() != (n_in + n_t) * 8 {
            return Err(Error::ModelFile(format!(
                "dataset payload is {} bytes, header implies {}",
                raw.len(),
                (n_in + n_t) * 8
            )));
        }
        let data = bytes_to_f64(&raw);
        let inputs = Array2::from_shape_vec((header.n_pairs, header.input_dim), data[..n_in].to_vec())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let targets = Array2::from_shape_vec((header.n_pairs, header.target_dim), data[n_in..].to_vec())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(DelayDataset {
            inputs,
            targets,
            spec: header.spec,
            d_p: header.d_p,
            target_mode_tag: header.target_mode,
            input_norm: header.input_norm,
            target_norm: header.target_norm,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    n_pairs: usize,
    input_dim: usize,
    target_dim: usize,
    spec: EmbeddingSpec,
    d_p: usize,
    target_mode: String,
    input_norm: Option<Normalization>,
    target_norm: Option<Normalization>,
    flattening_order: String,
    dtype: String,
}

/// Fits stats per underlying channel (column c of block j maps to channel
/// c = col % d_p), pooling all delay blocks of the training rows.
pub fn fit_embedding_norm(data: &Array2<f64>, d_p: usize, train_end: usize) -> Result<Normalization> {
    let blocks = data.ncols() / d_p;
    let mut mean = vec![0.0; d_p];
    let mut count = vec![0usize; d_p];
    for row in data.slice(ndarray::s![..train_end, ..]).rows() {
        for (col, &v) in row.iter().enumerate() {
            let c = col % d_p;
            mean[c] += v;
            count[c] += 1;
        }
    }
    for c in 0..d_p {
        mean[c] /= count[c] as f64;
    }
    let mut var = vec![0.0; d_p];
    for row in data.slice(ndarray::s![..train_end, ..]).rows() {
        for (col, &v) in row.iter().enumerate() {
            let c = col % d_p;
            let d = v - mean[c];
            var[c] += d * d;
        }
    }
    let mut scale = vec![0.0; d_p];
    for c in 0..d_p {
        scale[c] = (var[c] / count[c] as f64).sqrt();
        if !(scale[c] > 0.0) {
            return Err(Error::DegenerateInput(format!("zero-variance channel {c}")));
        }
    }
    let _ = blocks;
    Normalization::new(mean, scale)
}

/// Applies channel stats to every delay block of `data` in place.
pub fn apply_blockwise(data: &mut Array2<f64>, norm: &Normalization) {
    let d_p = norm.mean.len();
    for mut row in data.rows_mut() {
        for (col, v) in row.iter_mut().enumerate() {
            let c = col % d_p;
            *v = (*v - norm.mean[c]) / norm.scale[c];
        }
    }
}

/// Inverts channel stats over every delay block of `data` in place.
pub fn invert_blockwise(data: &mut Array2<f64>, norm: &Normalization) {
    let d_p = norm.mean.len();
    for mut row in data.rows_mut() {
        for (col, v) in row.iter_mut().enumerate() {
            let c = col % d_p;
            *v = *v * norm.scale[c] + norm.mean[c];
        }
    }
}

/// Applies channel stats to a single flattened embedding vector.
pub fn apply_vec(v: &mut [f64], norm: &Normalization) {
    let d_p = norm.mean.len();
    for (col, x) in v.iter_mut().enumerate() {
        let c = col % d_p;
        *x = (*x - norm.mean[c]) / norm.scale[c];
    }
}

/// Inverts channel stats on a single flattened embedding vector.
pub fn invert_vec(v: &mut [f64], norm: &Normalization) {
    let d_p = norm.mean.len();
    for (col, x) in v.iter_mut().enumerate() {
        let c = col % d_p;
        *x = *x * norm.scale[c] + norm.mean[c];
    }
}

/// Pooled standard deviation over all channels of a series (around the
/// pooled mean); the attractor-size scale used by the FNN criterion.
pub(crate) fn pooled_std(values: &ndarray::ArrayView2<'_, f64>) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}
