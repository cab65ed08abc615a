//! Detects whether a long model trajectory has left chaos for a fixed point
//! or a periodic orbit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseKind {
    Chaotic,
    FixedPoint,
    Periodic,
}

/// Classifies the trailing window (in time units) of a series:
/// fixed point when the trailing variance collapses relative to the whole
/// series, periodic when the trailing (mean-subtracted, vector) autocorrelation
/// returns above 0.99 at a nonzero lag, chaotic otherwise.
pub fn detect_collapse(series: &TimeSeries, window: f64) -> Result<CollapseKind> {
    let w = (window / series.dt).round() as usize;
    if w < 4 || series.n_samples() < 2 * w {
        return Err(Error::SeriesTooShort { needed: 2 * w.max(4), available: series.n_samples() });
    }
    let n = series.n_samples();
    let tail = series.values.slice(ndarray::s![n - w.., ..]);

    let total_var = pooled_variance(&series.values.view());
    let tail_var = pooled_variance(&tail);
    if tail_var < 1e-6 * total_var {
        return Ok(CollapseKind::FixedPoint);
    }

    // Vector autocorrelation of the mean-subtracted tail.
    let d = tail.ncols();
    let mean: Vec<f64> = (0..d)
        .map(|c| tail.column(c).iter().sum::<f64>() / w as f64)
        .collect();
    let denom: f64 = tail
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>())
        .sum();
    if denom == 0.0 {
        return Ok(CollapseKind::FixedPoint);
    }
    for lag in 1..=w / 2 {
        let mut acc = 0.0;
        for i in 0..w - lag {
            for c in 0..d {
                acc += (tail[[i, c]] - mean[c]) * (tail[[i + lag, c]] - mean[c]);
            }
        }
        // Biased pair normalization keeps C(lag) <= 1; a near-1 peak at a
        // nonzero lag means the tail repeats itself.
        let c = acc / (w - lag) as f64 / (denom / w as f64);
        if c > 0.99 {
            return Ok(CollapseKind::Periodic);
        }
    }
    Ok(CollapseKind::Chaotic)
}

fn pooled_variance(values: &ndarray::ArrayView2<'_, f64>) -> f64 {
    let d = values.ncols();
    let n = values.nrows() as f64;
    let mut total = 0.0;
    for c in 0..d {
        let col = values.column(c);
        let mean = col.iter().sum::<f64>() / n;
        total += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    }
    total
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
    fn decayed_transient_is_fixed_point() {
        // Starts oscillating, settles to a constant.
        let data: Vec<f64> = (0..2000)
            .map(|i| {
                let t = i as f64;
                5.0 + (t * 0.3).sin() * (-t / 100.0).exp()
            })
            .collect();
        let ts = scalar(data, 1.0);
        assert_eq!(detect_collapse(&ts, 500.0).unwrap(), CollapseKind::FixedPoint);
    }

    #[test]
    fn pure_sine_is_periodic() {
        let data: Vec<f64> = (0..4000)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 50.0).sin())
            .collect();
        let ts = scalar(data, 1.0);
        assert_eq!(detect_collapse(&ts, 1000.0).unwrap(), CollapseKind::Periodic);
    }

    #[test]
    fn short_series_rejected() {
        let ts = scalar(vec![0.0, 1.0, 2.0], 1.0);
        assert!(detect_collapse(&ts, 2.0).is_err());
    }
}
