//! Network serialization: `<name>.json` metadata plus a `<name>.weights`
//! blob of little-endian f64 guarded by a SHA-256 checksum.
//!
//! The blob holds, layer by layer, the weight matrix in row-major
//! [fan_in x fan_out] order followed by the bias vector. The JSON side
//! carries shapes, activations, the flattening-order tag for embedding
//! inputs, and a free-form metadata object the model layer fills in.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::mlp::{Activation, Mlp};
use crate::timeseries::{bytes_to_f64, read_json, write_json};

pub const FORMAT_VERSION: u32 = 1;
pub const FLATTENING_ORDER: &str = "newest_first";

#[derive(Serialize, Deserialize)]
struct MlpHeader {
    format_version: u32,
    flattening_order: String,
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    weights_file: String,
    weights_sha256: String,
    metadata: serde_json::Value,
}

fn weights_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("weights")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn weight_blob(net: &Mlp) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(net.n_parameters() * 8);
    for l in 0..net.n_layers() {
        for v in net.weights[l].iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for v in net.biases[l].iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

/// Writes `<path stem>.json` + `.weights`. `metadata` travels verbatim.
pub fn mlp_save(net: &Mlp, path: impl AsRef<Path>, metadata: serde_json::Value) -> Result<()> {
    let header_path = path.as_ref().with_extension("json");
    let wpath = weights_path(&header_path);
    let blob = weight_blob(net);
    let header = MlpHeader {
        format_version: FORMAT_VERSION,
        flattening_order: FLATTENING_ORDER.to_string(),
        layer_sizes: net.layer_sizes.clone(),
        activations: net.activations.clone(),
        weights_file: wpath
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        weights_sha256: sha256_hex(&blob),
        metadata,
    };
    write_json(&header_path, &header)?;
    fs::write(&wpath, blob)?;
    Ok(())
}

/// Loads a network and its metadata; verifies version and checksum.
pub fn mlp_load(path: impl AsRef<Path>) -> Result<(Mlp, serde_json::Value)> {
    let header_path = path.as_ref().with_extension("json");
    let header: MlpHeader = read_json(&header_path)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: header.format_version, expected: FORMAT_VERSION });
    }
    if header.flattening_order != FLATTENING_ORDER {
        return Err(Error::ModelFile(format!(
            "unknown flattening order {:?}",
            header.flattening_order
        )));
    }
    let wpath = weights_path(&header_path);
    let blob = fs::read(&wpath)?;
    if sha256_hex(&blob) != header.weights_sha256 {
        return Err(Error::ChecksumMismatch { path: wpath.display().to_string() });
    }
    let mut net = Mlp::init(&header.layer_sizes, &header.activations, 0)?;
    let expected_len = net.n_parameters() * 8;
    if blob.len() != expected_len {
        return Err(Error::ModelFile(format!(
            "weight blob is {} bytes, shapes imply {expected_len}",
            blob.len()
        )));
    }
    let flat = bytes_to_f64(&blob);
    let mut pos = 0;
    for l in 0..net.n_layers() {
        for v in net.weights[l].iter_mut() {
            *v = flat[pos];
            pos += 1;
        }
        for v in net.biases[l].iter_mut() {
            *v = flat[pos];
            pos += 1;
        }
    }
    Ok((net, header.metadata))
}
