//! Per-channel standardization (zero mean, unit scale).

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn new(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.len() != scale.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} means vs {} scales",
                mean.len(),
                scale.len()
            )));
        }
        if let Some(c) = scale.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::DegenerateInput(format!("non-positive scale for channel {c}")));
        }
        Ok(Normalization { mean, scale })
    }

    /// Identity stats for `dim` channels.
    pub fn identity(dim: usize) -> Self {
        Normalization { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Per-column mean and standard deviation of `data` (pass the training split).
pub fn normalize_fit(data: &ArrayView2<'_, f64>) -> Result<Normalization> {
    if data.nrows() == 0 {
        return Err(Error::invalid("cannot fit normalization on empty data".to_string()));
    }
    let n = data.nrows() as f64;
    let mut mean = Vec::with_capacity(data.ncols());
    let mut scale = Vec::with_capacity(data.ncols());
    for col in data.columns() {
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean.push(m);
        scale.push(var.sqrt());
    }
    Normalization::new(mean, scale)
}

pub fn normalize_apply(data: &ArrayView2<'_, f64>, norm: &Normalization) -> Result<Array2<f64>> {
    check_dim(data, norm)?;
    let mut out = data.to_owned();
    for mut row in out.rows_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (*v - norm.mean[c]) / norm.scale[c];
        }
    }
    Ok(out)
}

pub fn normalize_invert(data: &ArrayView2<'_, f64>, norm: &Normalization) -> Result<Array2<f64>> {
    check_dim(data, norm)?;
    let mut out = data.to_owned();
    for mut row in out.rows_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = *v * norm.scale[c] + norm.mean[c];
        }
    }
    Ok(out)
}

fn check_dim(data: &ArrayView2<'_, f64>, norm: &Normalization) -> Result<()> {
    if data.ncols() != norm.dim() {
        return Err(Error::ShapeMismatch(format!(
            "data has {} channels, normalization has {}",
            data.ncols(),
            norm.dim()
        )));
    }
    Ok(())
}
