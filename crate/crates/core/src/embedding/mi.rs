//! Lagged mutual information for delay selection.
//!
//! Histogram estimator with equiprobable (quantile) bins: bin edges are
//! computed once from the channel's empirical quantiles and shared by both
//! axes of the joint histogram, so MI(0) equals the marginal histogram
//! entropy and the estimate is robust to heavy-tailed amplitudes.

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

pub const DEFAULT_MI_BINS: usize = 16;

/// MI(lag) in nats for lag = 0..=max_lag.
pub fn mutual_information(
    series: &TimeSeries,
    channel: usize,
    max_lag: usize,
    n_bins: usize,
) -> Result<Vec<f64>> {
    if n_bins < 2 {
        return Err(Error::invalid(format!("n_bins must be >= 2, got {n_bins}")));
    }
    let col = series.channel(channel)?;
    let x: Vec<f64> = col.iter().copied().collect();
    let n = x.len();
    if n <= max_lag + 1 {
        return Err(Error::SeriesTooShort { needed: max_lag + 2, available: n });
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::DegenerateInput("constant channel has zero entropy".to_string()));
    }

    let edges = quantile_edges(&x, n_bins);
    let bins: Vec<usize> = x.iter().map(|&v| bin_of(v, &edges)).collect();

    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        out.push(mi_at_lag(&bins, lag, n_bins));
    }
    Ok(out)
}

/// Interior quantile edges (n_bins - 1 of them) from the sorted sample.
fn quantile_edges(x: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    (1..n_bins)
        .map(|k| {
            let pos = k * n / n_bins;
            sorted[pos.min(n - 1)]
        })
        .collect()
}

/// Number of interior edges <= v, capped to the last bin.
fn bin_of(v: f64, edges: &[f64]) -> usize {
    edges.partition_point(|e| *e <= v)
}

fn mi_at_lag(bins: &[usize], lag: usize, n_bins: usize) -> f64 {
    let n_pairs = bins.len() - lag;
    let mut joint = vec![0u64; n_bins * n_bins];
    let mut ma = vec![0u64; n_bins];
    let mut mb = vec![0u64; n_bins];
    for i in 0..n_pairs {
        let a = bins[i];
        let b = bins[i + lag];
        joint[a * n_bins + b] += 1;
        ma[a] += 1;
        mb[b] += 1;
    }
    let total = n_pairs as f64;
    let mut mi = 0.0;
    for a in 0..n_bins {
        if ma[a] == 0 {
            continue;
        }
        for b in 0..n_bins {
            let c = joint[a * n_bins + b];
            if c == 0 || mb[b] == 0 {
                continue;
            }
            let p_ab = c as f64 / total;
            let p_a = ma[a] as f64 / total;
            let p_b = mb[b] as f64 / total;
            mi += p_ab * (p_ab / (p_a * p_b)).ln();
        }
    }
    mi.max(0.0)
}

/// First local minimum of a curve: the smallest index i where the curve has
/// stopped decreasing (curve[i-1] >= curve[i]) and strictly rises afterwards
/// (curve[i] < curve[i+1]). On a flat-bottomed dip this picks the last index
/// of the plateau, i.e. the point where the rise begins.
pub fn first_minimum(curve: &[f64]) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::invalid(format!("curve must have >= 3 points, got {}", curve.len())));
    }
    for i in 1..curve.len() - 1 {
        if curve[i - 1] >= curve[i] && curve[i] < curve[i + 1] {
            return Ok(i);
        }
    }
    Err(Error::NoMinimum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series_from(data: Vec<f64>, dt: f64) -> TimeSeries {
        let n = data.len();
        TimeSeries::new(Array2::from_shape_vec((n, 1), data).unwrap(), dt, 0.0).unwrap()
    }

    #[test]
    fn independent_streams_have_near_zero_mi() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let data: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let ts = series_from(data, 1.0);
        // At lag >= 1 samples of white noise are independent.
        let mi = mutual_information(&ts, 0, 3, 16).unwrap();
        for lag in 1..=3 {
            assert!(mi[lag] < 0.05, "MI at lag {lag} = {}", mi[lag]);
        }
    }

    #[test]
    fn lag_zero_equals_marginal_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50_000;
        let n_bins = 16;
        let data: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let ts = series_from(data, 1.0);
        let mi = mutual_information(&ts, 0, 0, n_bins).unwrap();
        // Quantile bins make the marginal near uniform: entropy close to ln(16).
        let expected = (n_bins as f64).ln();
        assert!((mi[0] - expected).abs() < 0.01, "H = {} vs {expected}", mi[0]);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let ts = series_from(vec![2.0; 100], 1.0);
        assert!(matches!(mutual_information(&ts, 0, 5, 16), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn time_reversal_leaves_mi_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = 0.0;
        let data: Vec<f64> = (0..20_000)
            .map(|_| {
                v = 0.9 * v + rng.random_range(-1.0..1.0);
                v
            })
            .collect();
        let mut rev = data.clone();
        rev.reverse();
        let a = mutual_information(&series_from(data, 1.0), 0, 5, 16).unwrap();
        let b = mutual_information(&series_from(rev, 1.0), 0, 5, 16).unwrap();
        // Transposing the joint histogram swaps the marginals; MI is symmetric.
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn first_minimum_basic() {
        assert_eq!(first_minimum(&[3.0, 2.0, 1.0, 2.0, 3.0]).unwrap(), 2);
    }

    #[test]
    fn first_minimum_plateau_picks_rise_point() {
        assert_eq!(first_minimum(&[5.0, 4.0, 4.0, 6.0]).unwrap(), 2);
    }

    #[test]
    fn first_minimum_monotone_errors() {
        assert!(matches!(first_minimum(&[1.0, 2.0, 3.0]), Err(Error::NoMinimum)));
        assert!(matches!(first_minimum(&[3.0, 2.0, 1.0]), Err(Error::NoMinimum)));
    }
}
