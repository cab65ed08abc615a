//! False nearest neighbors for embedding-dimension selection.
//!
//! A nearest neighbor at embedding dimension m is declared false when the
//! extra distance from the (m+1)-th delay block either exceeds `rtol_fnn`
//! times the current neighbor distance or pushes the augmented distance past
//! `atol_fnn` times the series' standard deviation. Neighbor search is exact
//! brute force over a deterministic evenly spaced subsample of the points.

use crate::embedding::{embed_series, pooled_std, EmbeddingSpec, ObservationSpec};
use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

/// Conventional threshold defaults.
pub const DEFAULT_RTOL_FNN: f64 = 10.0;
pub const DEFAULT_ATOL_FNN: f64 = 2.0;
/// Brute-force neighbor search is quadratic; cap the point count.
pub const DEFAULT_FNN_SUBSAMPLE: usize = 10_000;

/// Fraction of false neighbors for each embedding dimension 1..=m_max.
pub fn false_nearest_neighbors(
    series: &TimeSeries,
    channel_set: &ObservationSpec,
    n_stride: usize,
    m_max: usize,
    rtol_fnn: f64,
    atol_fnn: f64,
) -> Result<Vec<f64>> {
    false_nearest_neighbors_capped(
        series,
        channel_set,
        n_stride,
        m_max,
        rtol_fnn,
        atol_fnn,
        DEFAULT_FNN_SUBSAMPLE,
    )
}

pub fn false_nearest_neighbors_capped(
    series: &TimeSeries,
    channel_set: &ObservationSpec,
    n_stride: usize,
    m_max: usize,
    rtol_fnn: f64,
    atol_fnn: f64,
    max_points: usize,
) -> Result<Vec<f64>> {
    if m_max < 2 {
        return Err(Error::invalid(format!("m_max must be >= 2, got {m_max}")));
    }
    if max_points < 2 {
        return Err(Error::invalid("subsample cap must be >= 2".to_string()));
    }
    let observed = crate::embedding::project(series, channel_set)?;
    let sigma = pooled_std(&observed.values.view());
    if !(sigma > 0.0) {
        return Err(Error::DegenerateInput("constant series".to_string()));
    }
    let d_p = observed.n_channels();

    let mut fractions = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        // Embed at m+1 so the augmenting block is available for every point.
        let spec = EmbeddingSpec::new(m + 1, n_stride, observed.dt)?;
        let (rows, _) = embed_series(&observed, &spec)?;
        let n_rows = rows.nrows();
        let take = n_rows.min(max_points);
        let idx: Vec<usize> = (0..take).map(|k| k * n_rows / take).collect();

        let width_m = m * d_p;
        let mut false_count = 0usize;
        for (qi, &q) in idx.iter().enumerate() {
            let qrow = rows.row(q);
            // Nearest neighbor in the m-dimensional embedding (first m blocks).
            let mut best = f64::INFINITY;
            let mut best_j = usize::MAX;
            for (pi, &p) in idx.iter().enumerate() {
                if pi == qi {
                    continue;
                }
                let prow = rows.row(p);
                let mut d2 = 0.0;
                for c in 0..width_m {
                    let diff = qrow[c] - prow[c];
                    d2 += diff * diff;
                    if d2 >= best {
                        break;
                    }
                }
                if d2 < best {
                    best = d2;
                    best_j = p;
                }
            }
            if best_j == usize::MAX {
                continue;
            }
            let prow = rows.row(best_j);
            let mut extra2 = 0.0;
            for c in width_m..width_m + d_p {
                let diff = qrow[c] - prow[c];
                extra2 += diff * diff;
            }
            let r_m = best.sqrt();
            let r_next = (best + extra2).sqrt();
            // Guard the ratio test against roundoff-scale duplicate points,
            // where the ratio of two noise-level distances is meaningless.
            let ratio_false = r_m > 1e-10 * sigma && extra2.sqrt() / r_m > rtol_fnn;
            let size_false = r_next / sigma > atol_fnn;
            if ratio_false || size_false {
                false_count += 1;
            }
        }
        fractions.push(false_count as f64 / idx.len() as f64);
    }
    Ok(fractions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(data: Vec<f64>) -> TimeSeries {
        let n = data.len();
        TimeSeries::new(Array2::from_shape_vec((n, 1), data).unwrap(), 1.0, 0.0).unwrap()
    }

    #[test]
    fn sine_saturates_at_two_dimensions() {
        // Quarter-period delay: the orbit is a circle, which embeds in 2-D.
        // Incommensurate period so samples fill the circle instead of
        // revisiting a handful of exact points.
        let period = 40.7;
        let data: Vec<f64> = (0..8000)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / period).sin())
            .collect();
        let ts = scalar(data);
        let obs = ObservationSpec::new(vec![0]).unwrap();
        let f = false_nearest_neighbors(&ts, &obs, 10, 4, 10.0, 2.0).unwrap();
        assert!(f[1] < 0.01, "FNN at m=2: {}", f[1]);
        assert!(f[2] < 0.01, "FNN at m=3: {}", f[2]);
    }

    #[test]
    fn white_noise_never_saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..30_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ts = scalar(data);
        let obs = ObservationSpec::new(vec![0]).unwrap();
        let f = false_nearest_neighbors_capped(&ts, &obs, 1, 6, 10.0, 2.0, 4000).unwrap();
        for (m, frac) in f.iter().enumerate() {
            assert!(*frac > 0.10, "FNN at m={} fell to {}", m + 1, frac);
        }
    }

    #[test]
    fn constant_series_rejected() {
        let ts = scalar(vec![1.0; 500]);
        let obs = ObservationSpec::new(vec![0]).unwrap();
        assert!(matches!(
            false_nearest_neighbors(&ts, &obs, 1, 3, 10.0, 2.0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn rescaling_leaves_fractions_unchanged() {
        // Both criteria are scale-homogeneous; powers of two keep the
        // arithmetic exact, so the fractions match bitwise.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = 0.0;
        let data: Vec<f64> = (0..4000)
            .map(|_| {
                v = 0.95 * v + rng.random_range(-1.0..1.0);
                v
            })
            .collect();
        let scaled: Vec<f64> = data.iter().map(|x| x * 1024.0).collect();
        let obs = ObservationSpec::new(vec![0]).unwrap();
        let a = false_nearest_neighbors_capped(&scalar(data), &obs, 2, 4, 10.0, 2.0, 2000).unwrap();
        let b = false_nearest_neighbors_capped(&scalar(scaled), &obs, 2, 4, 10.0, 2.0, 2000).unwrap();
        assert_eq!(a, b);
    }
}
