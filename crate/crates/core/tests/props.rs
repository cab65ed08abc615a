//! Property tests for the invariants that hold across modules.

use ndarray::Array2;
use proptest::prelude::*;

use delaycast_core::embedding::{
    build_embedding, normalize_apply, normalize_fit, normalize_invert, EmbeddingSpec, TargetMode,
};
use delaycast_core::eval::{joint_pdf, kl_divergence, RangePolicy};
use delaycast_core::timeseries::TimeSeries;

fn finite_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1e6f64..1e6, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn timeseries_round_trip_bit_exact(
        data in finite_values(60),
        n_channels in 1usize..4,
        dt in 1e-6f64..1e3,
    ) {
        let n_samples = data.len() / n_channels;
        let values = Array2::from_shape_vec(
            (n_samples, n_channels),
            data[..n_samples * n_channels].to_vec(),
        ).unwrap();
        let ts = TimeSeries::new(values, dt, -3.25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.json");
        ts.save(&path).unwrap();
        let back = TimeSeries::load(&path).unwrap();
        prop_assert_eq!(back.dt.to_bits(), ts.dt.to_bits());
        for (a, b) in ts.values.iter().zip(back.values.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn normalize_apply_invert_identity(
        data in finite_values(48),
    ) {
        let values = Array2::from_shape_vec((12, 4), data).unwrap();
        // Skip degenerate (zero-variance) draws.
        if let Ok(norm) = normalize_fit(&values.view()) {
            let fwd = normalize_apply(&values.view(), &norm).unwrap();
            let back = normalize_invert(&fwd.view(), &norm).unwrap();
            for (a, b) in values.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn embedding_slots_match_delayed_samples(
        data in finite_values(120),
        m in 1usize..5,
        n_stride in 1usize..4,
        d_p in 1usize..3,
    ) {
        let n_samples = data.len() / d_p;
        let values = Array2::from_shape_vec((n_samples, d_p), data[..n_samples * d_p].to_vec()).unwrap();
        let ts = TimeSeries::new(values, 0.5, 0.0).unwrap();
        let spec = EmbeddingSpec::new(m, n_stride, ts.dt).unwrap();
        let horizon = n_stride;
        if let Ok(ds) = build_embedding(&ts, &spec, TargetMode::NextPartial { horizon_stride: horizon }) {
            // Input slot j of pair r equals the raw series at i - j*stride.
            for r in 0..ds.n_pairs() {
                let i = spec.window() + r;
                for j in 0..m {
                    for c in 0..d_p {
                        prop_assert_eq!(
                            ds.inputs[[r, j * d_p + c]].to_bits(),
                            ts.values[[i - j * n_stride, c]].to_bits()
                        );
                    }
                }
                for c in 0..d_p {
                    prop_assert_eq!(
                        ds.targets[[r, c]].to_bits(),
                        ts.values[[i + horizon, c]].to_bits()
                    );
                }
            }
        }
    }

    #[test]
    fn kl_of_self_is_zero(
        data in finite_values(400),
        n_bins in 2usize..40,
    ) {
        let a = &data[..200];
        let b = &data[200..];
        let h = joint_pdf(a, b, n_bins, RangePolicy::FromData).unwrap();
        prop_assert_eq!(kl_divergence(&h, &h).unwrap(), 0.0);
    }

    #[test]
    fn autocorrelation_is_one_at_lag_zero(
        data in finite_values(64),
    ) {
        let n = data.len();
        let values = Array2::from_shape_vec((n, 1), data).unwrap();
        let ts = TimeSeries::new(values, 1.0, 0.0).unwrap();
        if let Ok(c) = delaycast_core::eval::autocorrelation(&ts, 0, 5) {
            prop_assert_eq!(c[0], 1.0);
        }
    }
}
