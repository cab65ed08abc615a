//! Uniformly sampled multivariate trajectories — the data currency shared by
//! simulation, embedding, training, and evaluation.
//!
//! On disk a series is a JSON header (`<stem>.json`) plus a sibling raw blob
//! (`<stem>.bin`) of little-endian f64 in row-major (time-major) order. The
//! round-trip is bit-exact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled trajectory: `values[[i, c]]` is channel `c` at time
/// `t0 + i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Array2<f64>,
    pub dt: f64,
    pub t0: f64,
    pub channel_names: Option<Vec<String>>,
}

impl TimeSeries {
    /// Builds a series and checks the invariants: at least one sample and one
    /// channel, positive dt, all values finite.
    pub fn new(values: Array2<f64>, dt: f64, t0: f64) -> Result<Self> {
        if values.nrows() < 1 || values.ncols() < 1 {
            return Err(Error::invalid(format!(
                "time series must have at least one sample and one channel, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive and finite, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::invalid(format!("t0 must be finite, got {t0}")));
        }
        if let Some((i, c)) = find_non_finite(&values) {
            return Err(Error::NonFinite(format!("value at sample {i}, channel {c}")));
        }
        Ok(TimeSeries { values, dt, t0, channel_names: None })
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_channels() {
            return Err(Error::invalid(format!(
                "{} channel names for {} channels",
                names.len(),
                self.n_channels()
            )));
        }
        self.channel_names = Some(names);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn channel(&self, c: usize) -> Result<ArrayView1<'_, f64>> {
        if c >= self.n_channels() {
            return Err(Error::ChannelOutOfRange { index: c, n_channels: self.n_channels() });
        }
        Ok(self.values.column(c))
    }

    /// Time stamp of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// New series containing samples `[start, end)` with `t0` advanced to the
    /// start of the slice.
    pub fn slice_samples(&self, start: usize, end: usize) -> Result<TimeSeries> {
        if start >= end || end > self.n_samples() {
            return Err(Error::invalid(format!(
                "bad sample range {start}..{end} for {} samples",
                self.n_samples()
            )));
        }
        Ok(TimeSeries {
            values: self.values.slice(ndarray::s![start..end, ..]).to_owned(),
            dt: self.dt,
            t0: self.time_at(start),
            channel_names: self.channel_names.clone(),
        })
    }

    /// Writes `<stem>.json` + `<stem>.bin`. `path` may name either file; the
    /// extension is replaced.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (header_path, bin_path) = sibling_paths(path.as_ref());
        let header = SeriesHeader {
            n_samples: self.n_samples(),
            n_channels: self.n_channels(),
            dt: self.dt,
            t0: self.t0,
            channel_names: self.channel_names.clone(),
            dtype: DTYPE_F64LE.to_string(),
        };
        write_json(&header_path, &header)?;
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in self.values.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&bin_path, &bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TimeSeries> {
        let (header_path, bin_path) = sibling_paths(path.as_ref());
        let header: SeriesHeader = read_json(&header_path)?;
        if header.dtype != DTYPE_F64LE {
            return Err(Error::ModelFile(format!("unsupported dtype {:?}", header.dtype)));
        }
        let raw = fs::read(&bin_path)?;
        let expect = header.n_samples * header.n_channels * 8;
        if raw.len() != expect {
            return Err(Error::ModelFile(format!(
                "binary payload is {} bytes, header implies {}",
                raw.len(),
                expect
            )));
        }
        let data = bytes_to_f64(&raw);
        let values = Array2::from_shape_vec((header.n_samples, header.n_channels), data)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let mut ts = TimeSeries::new(values, header.dt, header.t0)?;
        ts.channel_names = header.channel_names;
        Ok(ts)
    }
}

pub(crate) const DTYPE_F64LE: &str = "f64le";

#[derive(Serialize, Deserialize)]
struct SeriesHeader {
    n_samples: usize,
    n_channels: usize,
    dt: f64,
    t0: f64,
    channel_names: Option<Vec<String>>,
    dtype: String,
}

/// `<stem>.json` and `<stem>.bin` for any path naming either of them.
pub(crate) fn sibling_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn bytes_to_f64(raw: &[u8]) -> Vec<f64> {
    raw.chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn find_non_finite(values: &Array2<f64>) -> Option<(usize, usize)> {
    for ((i, c), v) in values.indexed_iter() {
        if !v.is_finite() {
            return Some((i, c));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_empty_and_bad_dt() {
        assert!(TimeSeries::new(Array2::zeros((0, 3)), 0.1, 0.0).is_err());
        assert!(TimeSeries::new(Array2::zeros((3, 0)), 0.1, 0.0).is_err());
        assert!(TimeSeries::new(Array2::zeros((3, 1)), 0.0, 0.0).is_err());
        assert!(TimeSeries::new(Array2::zeros((3, 1)), -0.1, 0.0).is_err());
    }

    #[test]
    fn rejects_non_finite_values() {
        let v = array![[1.0, 2.0], [f64::NAN, 3.0]];
        match TimeSeries::new(v, 0.1, 0.0) {
            Err(Error::NonFinite(_)) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn slice_advances_t0() {
        let v = Array2::from_shape_fn((10, 2), |(i, c)| (i * 2 + c) as f64);
        let ts = TimeSeries::new(v, 0.5, 1.0).unwrap();
        let s = ts.slice_samples(4, 8).unwrap();
        assert_eq!(s.n_samples(), 4);
        assert_eq!(s.t0, 3.0);
        assert_eq!(s.values[[0, 0]], 8.0);
    }

    #[test]
    fn save_load_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let v = Array2::from_shape_fn((7, 3), |(i, c)| (i as f64 + 0.1) * (c as f64 - 1.7));
        let ts = TimeSeries::new(v, 0.1, -2.5)
            .unwrap()
            .with_channel_names(vec!["x".into(), "y".into(), "z".into()])
            .unwrap();
        let path = dir.path().join("series.json");
        ts.save(&path).unwrap();
        let back = TimeSeries::load(&path).unwrap();
        assert_eq!(ts, back);
        for (a, b) in ts.values.iter().zip(back.values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn load_rejects_truncated_binary() {
        let dir = tempfile::tempdir().unwrap();
        let ts = TimeSeries::new(Array2::zeros((4, 2)), 0.1, 0.0).unwrap();
        let path = dir.path().join("series.json");
        ts.save(&path).unwrap();
        let bin = dir.path().join("series.bin");
        let raw = fs::read(&bin).unwrap();
        fs::write(&bin, &raw[..raw.len() - 8]).unwrap();
        assert!(TimeSeries::load(&path).is_err());
    }
}
