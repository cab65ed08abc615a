//! Ensemble-averaged short-term tracking error.
//!
//! Rollouts start from embeddings drawn at evenly spaced positions of a
//! held-out truth segment; at each horizon step the Euclidean error against
//! the truth continuation is normalized by the truth RMS amplitude. Members
//! run independently and the reduction is by member index, so results do not
//! depend on evaluation order (or on how many worker threads ran them).

use crate::embedding::EmbeddingSpec;
use crate::error::{Error, Result};
use crate::models::Forecaster;
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone)]
pub struct TrackingResult {
    /// Horizon times, starting at 0.
    pub times: Vec<f64>,
    /// Mean over surviving members of the normalized error at each time.
    pub mean_error: Vec<f64>,
    /// Median over surviving members.
    pub median_error: Vec<f64>,
    /// Quadratic mean (sqrt of the mean squared error); for a persistence
    /// forecast this reaches sqrt(2) at the decorrelation time.
    pub rms_error: Vec<f64>,
    /// Members whose rollout tripped the divergence sentinel.
    pub n_diverged: usize,
    pub n_members: usize,
}

/// Runs `n_ensembles` forecasts of `horizon` time units against a truth
/// partial series, comparing at the model's delay spacing.
pub fn ensemble_tracking_error<M: Forecaster + Sync>(
    model: &M,
    truth: &TimeSeries,
    n_ensembles: usize,
    horizon: f64,
) -> Result<TrackingResult> {
    let spec: EmbeddingSpec = *model.spec();
    spec.check_dt(truth.dt)?;
    let d_p = model.obs_dim();
    if truth.n_channels() != d_p {
        return Err(Error::ShapeMismatch(format!(
            "truth has {} channels, model observes {d_p}",
            truth.n_channels()
        )));
    }
    let n_steps = (horizon / spec.tau).round().max(1.0) as usize;
    let window = spec.window();
    let horizon_samples = n_steps * spec.n_stride;
    let n = truth.n_samples();
    if n < window + horizon_samples + 1 {
        return Err(Error::SeriesTooShort { needed: window + horizon_samples + 1, available: n });
    }
    let n_starts = n - window - horizon_samples;
    if n_ensembles == 0 || n_ensembles > n_starts {
        return Err(Error::invalid(format!(
            "need 1..={n_starts} ensemble members for this series, got {n_ensembles}"
        )));
    }

    // RMS amplitude of the truth segment (Euclidean over channels).
    let rms = {
        let acc: f64 = truth.values.iter().map(|v| v * v).sum();
        (acc / truth.n_samples() as f64).sqrt()
    };
    if !(rms > 0.0) {
        return Err(Error::DegenerateInput("zero-amplitude truth series".to_string()));
    }

    // Per-member error curves, indexed by member; evenly spaced starts.
    let member_errors = run_members(model, truth, &spec, n_ensembles, n_starts, n_steps, d_p)?;

    let mut mean_error = Vec::with_capacity(n_steps + 1);
    let mut median_error = Vec::with_capacity(n_steps + 1);
    let mut rms_error = Vec::with_capacity(n_steps + 1);
    let mut n_diverged = 0;
    for member in &member_errors {
        if member.len() < n_steps + 1 {
            n_diverged += 1;
        }
    }
    for step in 0..=n_steps {
        let mut vals: Vec<f64> = member_errors
            .iter()
            .filter_map(|m| m.get(step).copied())
            .collect();
        if vals.is_empty() {
            mean_error.push(f64::NAN);
            median_error.push(f64::NAN);
            rms_error.push(f64::NAN);
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64 / rms;
        let quad = (vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64).sqrt() / rms;
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if vals.len() % 2 == 1 {
            vals[vals.len() / 2]
        } else {
            0.5 * (vals[vals.len() / 2 - 1] + vals[vals.len() / 2])
        } / rms;
        mean_error.push(mean);
        median_error.push(median);
        rms_error.push(quad);
    }

    Ok(TrackingResult {
        times: (0..=n_steps).map(|k| k as f64 * spec.tau).collect(),
        mean_error,
        median_error,
        rms_error,
        n_diverged,
        n_members: n_ensembles,
    })
}

fn run_members<M: Forecaster + Sync>(
    model: &M,
    truth: &TimeSeries,
    spec: &EmbeddingSpec,
    n_ensembles: usize,
    n_starts: usize,
    n_steps: usize,
    d_p: usize,
) -> Result<Vec<Vec<f64>>> {
    let one = |member: usize| -> Result<Vec<f64>> {
        // Newest observation of the initial embedding sits at `start`.
        let start = spec.window() + member * n_starts / n_ensembles;
        let mut u_d0 = Vec::with_capacity(spec.m * d_p);
        for j in 0..spec.m {
            let row = truth.values.row(start - j * spec.n_stride);
            u_d0.extend(row.iter());
        }
        let rollout = model.forecast(&u_d0, n_steps, spec.tau)?;
        let produced = rollout.series.n_samples();
        let mut errs = Vec::with_capacity(produced);
        for step in 0..produced {
            let pred = rollout.series.values.row(step);
            let actual = truth.values.row(start + step * spec.n_stride);
            let e2: f64 = pred
                .iter()
                .zip(actual.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            errs.push(e2.sqrt());
        }
        Ok(errs)
    };

    let threads = crate::eval::eval_threads();
    if threads <= 1 || n_ensembles < 32 {
        (0..n_ensembles).map(one).collect()
    } else {
        // Chunked across scoped threads, written back by member index.
        let mut out: Vec<Option<Vec<f64>>> = vec![None; n_ensembles];
        let chunk = n_ensembles.div_ceil(threads);
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::new();
            for (ci, slot_chunk) in out.chunks_mut(chunk).enumerate() {
                let one_ref = &one;
                handles.push(scope.spawn(move || -> Result<()> {
                    for (k, slot) in slot_chunk.iter_mut().enumerate() {
                        *slot = Some(one_ref(ci * chunk + k)?);
                    }
                    Ok(())
                }));
            }
            for h in handles {
                h.join().expect("tracking worker panicked")?;
            }
            Ok(())
        })?;
        Ok(out.into_iter().map(|v| v.unwrap()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{Normalization, ObservationSpec};
    use crate::models::{DtsModel, Rollout};
    use crate::nn::{Activation, Mlp};
    use ndarray::Array2;

    /// Oracle stepper that reads the truth series itself.
    struct OracleModel<'a> {
        spec: EmbeddingSpec,
        truth: &'a TimeSeries,
    }

    impl Forecaster for OracleModel<'_> {
        fn spec(&self) -> &EmbeddingSpec {
            &self.spec
        }

        fn obs_dim(&self) -> usize {
            1
        }

        fn forecast(&self, u_d0: &[f64], n_steps: usize, _step_dt: f64) -> Result<Rollout> {
            // Locate the start by matching the newest observation.
            let start = (0..self.truth.n_samples())
                .find(|&i| self.truth.values[[i, 0]] == u_d0[0])
                .unwrap();
            let rows: Vec<f64> = (0..=n_steps)
                .map(|k| self.truth.values[[start + k * self.spec.n_stride, 0]])
                .collect();
            let values = Array2::from_shape_vec((n_steps + 1, 1), rows.clone()).unwrap();
            let series = TimeSeries::new(values, self.spec.tau, 0.0).unwrap();
            let embeddings = Array2::from_shape_vec((n_steps + 1, 1), rows).unwrap();
            Ok(Rollout { series, embeddings, diverged_at: None })
        }
    }

    fn wavy_truth(n: usize) -> TimeSeries {
        let data: Vec<f64> = (0..n)
            .map(|i| (i as f64 * 0.37).sin() + 0.2 * (i as f64 * 0.11).cos() + i as f64 * 1e-9)
            .collect();
        TimeSeries::new(Array2::from_shape_vec((n, 1), data).unwrap(), 0.1, 0.0).unwrap()
    }

    #[test]
    fn oracle_model_has_zero_error() {
        let truth = wavy_truth(2000);
        let model = OracleModel { spec: EmbeddingSpec::new(1, 1, 0.1).unwrap(), truth: &truth };
        let r = ensemble_tracking_error(&model, &truth, 50, 1.0).unwrap();
        for e in &r.mean_error {
            assert!(e.abs() < 1e-12);
        }
        assert_eq!(r.n_diverged, 0);
    }

    #[test]
    fn persistence_error_reaches_sqrt_two_at_decorrelation() {
        // Persistence on a zero-mean sine: the squared error at lag L is
        // 2<u^2>(1 - C(L)), so the quadratic-mean error reaches sqrt(2) x RMS
        // at the decorrelation lag (quarter period). Every valid start is used
        // so the phase average is uniform.
        let n = 4_000;
        let period = 200usize;
        let data: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / period as f64).sin())
            .collect();
        let truth = TimeSeries::new(Array2::from_shape_vec((n, 1), data).unwrap(), 1.0, 0.0).unwrap();

        // Persistence as a DTS model: identity on the newest block.
        let mut net = Mlp::init(&[1, 1], &[Activation::Linear], 0).unwrap();
        net.zero_params();
        net.weights[0][[0, 0]] = 1.0;
        let model = DtsModel {
            net,
            spec: EmbeddingSpec::new(1, 1, 1.0).unwrap(),
            obs: ObservationSpec::new(vec![0]).unwrap(),
            input_norm: Normalization::identity(1),
            target_norm: Normalization::identity(1),
        };
        let horizon = period as f64 / 4.0;
        let n_starts = n - period / 4;
        let r = ensemble_tracking_error(&model, &truth, n_starts, horizon).unwrap();
        let last = *r.rms_error.last().unwrap();
        assert!((last - std::f64::consts::SQRT_2).abs() < 0.1, "error at decorrelation: {last}");
    }

    #[test]
    fn too_many_members_rejected() {
        let truth = wavy_truth(200);
        let model = OracleModel { spec: EmbeddingSpec::new(1, 1, 0.1).unwrap(), truth: &truth };
        assert!(ensemble_tracking_error(&model, &truth, 100_000, 1.0).is_err());
    }
}
