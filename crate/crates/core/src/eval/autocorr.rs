//! Autocorrelation of the partial observable.
//!
//! The primary estimator is un-centered, C(l) = <u(0) u(l)> / <u^2>, with the
//! biased 1/n pair normalization so C(0) = 1 exactly. A mean-subtracted
//! variant is kept for diagnostics (collapse detection uses it); the
//! un-centered form can exceed 1 at nonzero lags for signals with a mean.

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

pub fn autocorrelation(series: &TimeSeries, channel: usize, max_lag: usize) -> Result<Vec<f64>> {
    let col = series.channel(channel)?;
    let x: Vec<f64> = col.iter().copied().collect();
    autocorr_slice(&x, max_lag, false)
}

/// Mean-subtracted variant for diagnostics.
pub fn autocorrelation_centered(
    series: &TimeSeries,
    channel: usize,
    max_lag: usize,
) -> Result<Vec<f64>> {
    let col = series.channel(channel)?;
    let x: Vec<f64> = col.iter().copied().collect();
    autocorr_slice(&x, max_lag, true)
}

pub(crate) fn autocorr_slice(x: &[f64], max_lag: usize, centered: bool) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= max_lag {
        return Err(Error::SeriesTooShort { needed: max_lag + 1, available: n });
    }
    if n < 100 * max_lag.max(1) {
        log::warn!(
            "autocorrelation: series length {n} is below 100x max_lag = {}; estimates will be noisy",
            100 * max_lag
        );
    }
    let mean = if centered { x.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let shifted: Vec<f64> = x.iter().map(|v| v - mean).collect();

    let denom: f64 = shifted.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let var_centered = {
        let m = x.iter().sum::<f64>() / n as f64;
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64
    };
    if var_centered == 0.0 {
        return Err(Error::DegenerateInput("zero-variance series".to_string()));
    }

    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let acc: f64 = (0..n - lag).map(|i| shifted[i] * shifted[i + lag]).sum();
        out.push(acc / n as f64 / denom);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn scalar(data: Vec<f64>, dt: f64) -> TimeSeries {
        let n = data.len();
        TimeSeries::new(Array2::from_shape_vec((n, 1), data).unwrap(), dt, 0.0).unwrap()
    }

    #[test]
    fn lag_zero_is_exactly_one() {
        let data: Vec<f64> = (0..500).map(|i| (i as f64 * 0.713).sin() + 0.3).collect();
        let c = autocorrelation(&scalar(data, 0.1), 0, 10).unwrap();
        assert_eq!(c[0], 1.0);
    }

    #[test]
    fn sinusoid_autocorrelation_is_cosine() {
        // Long sinusoid: C(l) ~ cos(w l dt) under the un-centered normalization
        // (the mean of a full-period sample is ~0 anyway).
        let omega = 2.0 * std::f64::consts::PI / 50.0;
        let n = 100_000;
        let data: Vec<f64> = (0..n).map(|i| (omega * i as f64).sin()).collect();
        let c = autocorrelation(&scalar(data, 1.0), 0, 100).unwrap();
        for lag in 0..=100 {
            let expect = (omega * lag as f64).cos();
            assert!(
                (c[lag] - expect).abs() < 0.01,
                "lag {lag}: {} vs {expect}",
                c[lag]
            );
        }
    }

    #[test]
    fn constant_series_rejected() {
        let res = autocorrelation(&scalar(vec![4.0; 1000], 1.0), 0, 5);
        assert!(matches!(res, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn centered_variant_decays_for_offset_sine() {
        let omega = 2.0 * std::f64::consts::PI / 40.0;
        let data: Vec<f64> = (0..40_000).map(|i| 5.0 + (omega * i as f64).sin()).collect();
        let ts = scalar(data, 1.0);
        let raw = autocorrelation(&ts, 0, 20).unwrap();
        let centered = autocorrelation_centered(&ts, 0, 20).unwrap();
        // Un-centered stays near 1 (mean dominates); centered follows the cosine.
        assert!(raw[20] > 0.9);
        assert!((centered[20] - (omega * 20.0).cos()).abs() < 0.02);
    }
}
