//! Two-dimensional histograms and the KL divergence between them.
//!
//! Densities are normalized by the total sample count (not just in-range
//! samples), so the density integrates to exactly 1 only when nothing falls
//! outside the range; the out-of-range fraction is tracked. Model histograms
//! must share the truth histogram's edges for the KL to be well defined;
//! bins where either density vanishes contribute zero.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{bytes_to_f64, read_json, sibling_paths, write_json, DTYPE_F64LE};

#[derive(Debug, Clone)]
pub struct Histogram2D {
    /// Canonical ranges the bins were built from; edges derive from these.
    range_x: (f64, f64),
    range_y: (f64, f64),
    /// n_bins + 1 edges per axis.
    pub edges_x: Vec<f64>,
    pub edges_y: Vec<f64>,
    pub counts: Array2<u64>,
    pub density: Array2<f64>,
    pub n_total: u64,
    pub n_out_of_range: u64,
}

#[derive(Debug, Clone, Copy)]
pub enum RangePolicy {
    /// Per-axis [min, max] from the data itself (degenerate spans widen by 0.5).
    FromData,
    /// Explicit ranges, normally taken from the truth histogram.
    Fixed { x: (f64, f64), y: (f64, f64) },
}

impl Histogram2D {
    pub fn n_bins(&self) -> (usize, usize) {
        (self.edges_x.len() - 1, self.edges_y.len() - 1)
    }

    pub fn bin_area(&self) -> f64 {
        let (nx, ny) = self.n_bins();
        let wx = (self.range_x.1 - self.range_x.0) / nx as f64;
        let wy = (self.range_y.1 - self.range_y.0) / ny as f64;
        wx * wy
    }

    pub fn out_of_range_fraction(&self) -> f64 {
        if self.n_total == 0 {
            0.0
        } else {
            self.n_out_of_range as f64 / self.n_total as f64
        }
    }

    /// Bin-area-weighted integral of the density.
    pub fn density_integral(&self) -> f64 {
        self.density.sum() * self.bin_area()
    }

    pub fn range_x(&self) -> (f64, f64) {
        self.range_x
    }

    pub fn range_y(&self) -> (f64, f64) {
        self.range_y
    }

    /// JSON header + f64le density grid (row-major over x bins then y bins).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (header_path, bin_path) = sibling_paths(path.as_ref());
        let (nx, ny) = self.n_bins();
        let header = HistHeader {
            n_bins_x: nx,
            n_bins_y: ny,
            range_x: self.range_x(),
            range_y: self.range_y(),
            n_total: self.n_total,
            n_out_of_range: self.n_out_of_range,
            dtype: DTYPE_F64LE.to_string(),
        };
        write_json(&header_path, &header)?;
        let mut bytes = Vec::with_capacity(self.density.len() * 8);
        for v in self.density.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&bin_path, bytes)?;
        Ok(())
    }

    /// Loads the density grid; counts are reconstructed from the density.
    pub fn load(path: impl AsRef<Path>) -> Result<Histogram2D> {
        let (header_path, bin_path) = sibling_paths(path.as_ref());
        let header: HistHeader = read_json(&header_path)?;
        let raw = std::fs::read(&bin_path)?;
        if raw.len() != header.n_bins_x * header.n_bins_y * 8 {
            return Err(Error::ModelFile("histogram payload size mismatch".to_string()));
        }
        let density =
            Array2::from_shape_vec((header.n_bins_x, header.n_bins_y), bytes_to_f64(&raw))
                .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let edges_x = linspace(header.range_x.0, header.range_x.1, header.n_bins_x + 1);
        let edges_y = linspace(header.range_y.0, header.range_y.1, header.n_bins_y + 1);
        let bin_area = {
            let wx = (header.range_x.1 - header.range_x.0) / header.n_bins_x as f64;
            let wy = (header.range_y.1 - header.range_y.0) / header.n_bins_y as f64;
            wx * wy
        };
        let counts = density.mapv(|d| (d * bin_area * header.n_total as f64).round() as u64);
        Ok(Histogram2D {
            range_x: header.range_x,
            range_y: header.range_y,
            edges_x,
            edges_y,
            counts,
            density,
            n_total: header.n_total,
            n_out_of_range: header.n_out_of_range,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct HistHeader {
    n_bins_x: usize,
    n_bins_y: usize,
    range_x: (f64, f64),
    range_y: (f64, f64),
    n_total: u64,
    n_out_of_range: u64,
    dtype: String,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn data_range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Density-normalized 2-D histogram of paired samples.
pub fn joint_pdf(
    series_a: &[f64],
    series_b: &[f64],
    n_bins: usize,
    range_policy: RangePolicy,
) -> Result<Histogram2D> {
    if series_a.len() != series_b.len() {
        return Err(Error::ShapeMismatch(format!(
            "paired samples differ in length: {} vs {}",
            series_a.len(),
            series_b.len()
        )));
    }
    if series_a.is_empty() {
        return Err(Error::invalid("cannot histogram empty input".to_string()));
    }
    if n_bins < 1 {
        return Err(Error::invalid("n_bins must be >= 1".to_string()));
    }
    let (range_x, range_y) = match range_policy {
        RangePolicy::FromData => (data_range(series_a), data_range(series_b)),
        RangePolicy::Fixed { x, y } => (x, y),
    };
    if !(range_x.1 > range_x.0) || !(range_y.1 > range_y.0) {
        return Err(Error::invalid("histogram ranges must have positive width".to_string()));
    }

    let mut counts = Array2::<u64>::zeros((n_bins, n_bins));
    let mut out_of_range = 0u64;
    let wx = (range_x.1 - range_x.0) / n_bins as f64;
    let wy = (range_y.1 - range_y.0) / n_bins as f64;
    for (&a, &b) in series_a.iter().zip(series_b.iter()) {
        // The top edge is inclusive so FromData histograms keep the max sample.
        let bx = bin_index(a, range_x, wx, n_bins);
        let by = bin_index(b, range_y, wy, n_bins);
        match (bx, by) {
            (Some(i), Some(j)) => counts[[i, j]] += 1,
            _ => out_of_range += 1,
        }
    }

    let n_total = series_a.len() as u64;
    let bin_area = wx * wy;
    let density = counts.mapv(|c| c as f64 / (n_total as f64 * bin_area));
    Ok(Histogram2D {
        range_x,
        range_y,
        edges_x: linspace(range_x.0, range_x.1, n_bins + 1),
        edges_y: linspace(range_y.0, range_y.1, n_bins + 1),
        counts,
        density,
        n_total,
        n_out_of_range: out_of_range,
    })
}

fn bin_index(v: f64, range: (f64, f64), width: f64, n_bins: usize) -> Option<usize> {
    if !v.is_finite() || v < range.0 || v > range.1 {
        return None;
    }
    let idx = ((v - range.0) / width) as usize;
    Some(idx.min(n_bins - 1))
}

/// KL divergence sum over bins where both densities are nonzero:
/// sum p_model ln(p_model / p_truth) * bin_area. Empty bins on either side
/// contribute zero.
pub fn kl_divergence(p_model: &Histogram2D, p_truth: &Histogram2D) -> Result<f64> {
    if p_model.range_x != p_truth.range_x
        || p_model.range_y != p_truth.range_y
        || p_model.n_bins() != p_truth.n_bins()
    {
        return Err(Error::EdgeMismatch);
    }
    let area = p_model.bin_area();
    let mut acc = 0.0;
    for (pm, pt) in p_model.density.iter().zip(p_truth.density.iter()) {
        if *pm > 0.0 && *pt > 0.0 {
            acc += pm * (pm / pt).ln() * area;
        }
    }
    Ok(acc)
}
