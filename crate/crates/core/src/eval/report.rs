//! Long-run statistical evaluation: rollout, reconstruction, autocorrelation,
//! joint PDF, and KL divergence against truth, with collapse flagging.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::dynsys::kse::spectral_derivatives;
use crate::error::{Error, Result};
use crate::eval::autocorr::autocorr_slice;
use crate::eval::collapse::{detect_collapse, CollapseKind};
use crate::eval::histogram::{joint_pdf, kl_divergence, Histogram2D, RangePolicy};
use crate::models::{recon_apply, Forecaster, ReconModel};

/// Which pair of variables the attractor joint PDF is built from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PdfVariables {
    /// Two channels of the reconstructed full state.
    Channels { a: usize, b: usize },
    /// First and second spatial derivatives, pooled over every grid point of
    /// every snapshot (spatially homogeneous periodic fields).
    SpatialDerivatives { domain_length: f64 },
}

#[derive(Debug, Clone)]
pub struct LongRunOptions {
    /// Rollout sampling interval; discrete-time models require the delay tau.
    pub sample_dt: f64,
    pub n_bins: usize,
    pub autocorr_max_lag: usize,
    /// Trailing window (time units) for collapse detection.
    pub collapse_window: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Horizon times and ensemble tracking error, when merged in.
    pub tracking_times: Vec<f64>,
    pub tracking_error: Vec<f64>,
    pub autocorr_lags: Vec<f64>,
    pub autocorr: Vec<f64>,
    pub kl_divergence: f64,
    pub collapse: CollapseKind,
    /// Set when the rollout tripped the divergence sentinel; time of the trip.
    pub collapse_time: Option<f64>,
    pub out_of_range_fraction: f64,
    pub metadata: serde_json::Value,
}

impl EvalReport {
    pub fn collapsed(&self) -> bool {
        self.collapse != CollapseKind::Chaotic || self.collapse_time.is_some()
    }

    pub fn save_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::timeseries::write_json(path.as_ref(), self)
    }
}

/// Extracts the two PDF variables from full-state rows.
pub fn pdf_samples(values: &ArrayView2<'_, f64>, vars: &PdfVariables) -> Result<(Vec<f64>, Vec<f64>)> {
    match vars {
        PdfVariables::Channels { a, b } => {
            if *a >= values.ncols() || *b >= values.ncols() {
                return Err(Error::ChannelOutOfRange {
                    index: (*a).max(*b),
                    n_channels: values.ncols(),
                });
            }
            Ok((values.column(*a).to_vec(), values.column(*b).to_vec()))
        }
        PdfVariables::SpatialDerivatives { domain_length } => {
            let n = values.nrows() * values.ncols();
            let mut ux = Vec::with_capacity(n);
            let mut uxx = Vec::with_capacity(n);
            for row in values.rows() {
                let snap: Vec<f64> = row.to_vec();
                ux.extend(spectral_derivatives(&snap, *domain_length, 1)?);
                uxx.extend(spectral_derivatives(&snap, *domain_length, 2)?);
            }
            Ok((ux, uxx))
        }
    }
}

/// Truth-side histogram with data-derived ranges; its edges anchor every
/// model-side histogram so KL is well defined.
pub fn truth_histogram(
    values: &ArrayView2<'_, f64>,
    vars: &PdfVariables,
    n_bins: usize,
) -> Result<Histogram2D> {
    let (a, b) = pdf_samples(values, vars)?;
    joint_pdf(&a, &b, n_bins, RangePolicy::FromData)
}

/// Model-side histogram on the truth histogram's edges.
pub fn model_histogram(
    values: &ArrayView2<'_, f64>,
    vars: &PdfVariables,
    truth: &Histogram2D,
) -> Result<Histogram2D> {
    let (a, b) = pdf_samples(values, vars)?;
    joint_pdf(
        &a,
        &b,
        truth.n_bins().0,
        RangePolicy::Fixed { x: truth.range_x(), y: truth.range_y() },
    )
}

/// Rolls the model out for `duration`, reconstructs the full state, and
/// compares its statistics against the truth histogram. Early divergence or
/// collapse is flagged in the report rather than erroring.
pub fn long_run_statistics<M: Forecaster>(
    model: &M,
    recon: &ReconModel,
    u_d0: &[f64],
    duration: f64,
    truth_hist: &Histogram2D,
    vars: &PdfVariables,
    opts: &LongRunOptions,
) -> Result<EvalReport> {
    let n_steps = (duration / opts.sample_dt).round().max(1.0) as usize;
    let rollout = model.forecast(u_d0, n_steps, opts.sample_dt)?;
    let produced = rollout.series.n_samples();

    let max_lag = opts.autocorr_max_lag.min(produced.saturating_sub(2));
    let autocorr = if produced >= 8 {
        let x: Vec<f64> = rollout.series.values.column(0).to_vec();
        autocorr_slice(&x, max_lag, false).unwrap_or_default()
    } else {
        Vec::new()
    };

    let collapse = if produced >= (2.0 * opts.collapse_window / opts.sample_dt) as usize + 2 {
        detect_collapse(&rollout.series, opts.collapse_window)?
    } else {
        // Too little survived to classify; the divergence flag carries it.
        CollapseKind::Chaotic
    };

    let recon_states = recon_apply(recon, &rollout.embeddings.view())?;
    let model_hist = model_histogram(&recon_states.view(), vars, truth_hist)?;
    let kl = kl_divergence(&model_hist, truth_hist)?;

    Ok(EvalReport {
        tracking_times: Vec::new(),
        tracking_error: Vec::new(),
        autocorr_lags: (0..autocorr.len()).map(|l| l as f64 * opts.sample_dt).collect(),
        autocorr,
        kl_divergence: kl,
        collapse,
        collapse_time: rollout.diverged_at.map(|s| s as f64 * opts.sample_dt),
        out_of_range_fraction: model_hist.out_of_range_fraction(),
        metadata: serde_json::json!({
            "n_steps_requested": n_steps,
            "n_steps_produced": produced - 1,
            "sample_dt": opts.sample_dt,
            "n_bins": truth_hist.n_bins().0,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn channel_samples_extracted() {
        let values = Array2::from_shape_fn((10, 3), |(i, c)| (i * 10 + c) as f64);
        let (a, b) = pdf_samples(&values.view(), &PdfVariables::Channels { a: 0, b: 2 }).unwrap();
        assert_eq!(a[3], 30.0);
        assert_eq!(b[3], 32.0);
        assert!(pdf_samples(&values.view(), &PdfVariables::Channels { a: 0, b: 5 }).is_err());
    }

    #[test]
    fn derivative_samples_pool_all_grid_points() {
        let l = 22.0;
        let n_grid = 64;
        let values = Array2::from_shape_fn((5, n_grid), |(s, i)| {
            ((2.0 * std::f64::consts::PI * i as f64 / n_grid as f64) + s as f64 * 0.3).sin()
        });
        let (ux, uxx) =
            pdf_samples(&values.view(), &PdfVariables::SpatialDerivatives { domain_length: l })
                .unwrap();
        assert_eq!(ux.len(), 5 * n_grid);
        assert_eq!(uxx.len(), 5 * n_grid);
    }
}
