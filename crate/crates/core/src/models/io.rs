//! Model persistence on top of the network format: the JSON metadata object
//! carries a `model_kind` tag plus the embedding, observation, and
//! normalization needed to act on raw physical units after loading.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingSpec, Normalization, ObservationSpec};
use crate::error::{Error, Result};
use crate::models::{DtsModel, NodeModel, ReconModel};
use crate::nn::{mlp_load, mlp_save};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dts,
    Node,
    Recon,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Dts => write!(f, "dts"),
            ModelKind::Node => write!(f, "node"),
            ModelKind::Recon => write!(f, "recon"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NodeMeta {
    damping_a: f64,
    n_multistep: usize,
    train_dt: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    model_kind: ModelKind,
    spec: EmbeddingSpec,
    obs: ObservationSpec,
    input_norm: Normalization,
    /// Target stats for dts, full-state stats for recon, shared embedding
    /// stats for node.
    output_norm: Normalization,
    node: Option<NodeMeta>,
    provenance: serde_json::Value,
}

#[derive(Debug)]
pub enum AnyModel {
    Dts(DtsModel),
    Node(NodeModel),
    Recon(ReconModel),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Dts(_) => ModelKind::Dts,
            AnyModel::Node(_) => ModelKind::Node,
            AnyModel::Recon(_) => ModelKind::Recon,
        }
    }
}

pub fn save_dts(model: &DtsModel, path: impl AsRef<Path>, provenance: serde_json::Value) -> Result<()> {
    let meta = ModelMeta {
        model_kind: ModelKind::Dts,
        spec: model.spec,
        obs: model.obs.clone(),
        input_norm: model.input_norm.clone(),
        output_norm: model.target_norm.clone(),
        node: None,
        provenance,
    };
    mlp_save(&model.net, path, serde_json::to_value(&meta)?)
}

pub fn save_node(model: &NodeModel, path: impl AsRef<Path>, provenance: serde_json::Value) -> Result<()> {
    let meta = ModelMeta {
        model_kind: ModelKind::Node,
        spec: model.spec,
        obs: model.obs.clone(),
        input_norm: model.norm.clone(),
        output_norm: model.norm.clone(),
        node: Some(NodeMeta {
            damping_a: model.damping_a,
            n_multistep: model.n_multistep,
            train_dt: model.train_dt,
        }),
        provenance,
    };
    mlp_save(&model.net, path, serde_json::to_value(&meta)?)
}

pub fn save_recon(model: &ReconModel, path: impl AsRef<Path>, provenance: serde_json::Value) -> Result<()> {
    let meta = ModelMeta {
        model_kind: ModelKind::Recon,
        spec: model.spec,
        obs: model.obs.clone(),
        input_norm: model.input_norm.clone(),
        output_norm: model.output_norm.clone(),
        node: None,
        provenance,
    };
    mlp_save(&model.net, path, serde_json::to_value(&meta)?)
}

/// Loads any saved model, dispatching on the `model_kind` tag. Also returns
/// the stored provenance.
pub fn load_model(path: impl AsRef<Path>) -> Result<(AnyModel, serde_json::Value)> {
    let (net, meta_value) = mlp_load(path)?;
    let meta: ModelMeta = serde_json::from_value(meta_value)
        .map_err(|e| Error::ModelFile(format!("bad model metadata: {e}")))?;
    let model = match meta.model_kind {
        ModelKind::Dts => AnyModel::Dts(DtsModel {
            net,
            spec: meta.spec,
            obs: meta.obs,
            input_norm: meta.input_norm,
            target_norm: meta.output_norm,
        }),
        ModelKind::Node => {
            let n = meta.node.ok_or_else(|| {
                Error::ModelFile("node model missing damping/horizon metadata".to_string())
            })?;
            AnyModel::Node(NodeModel {
                net,
                damping_a: n.damping_a,
                spec: meta.spec,
                obs: meta.obs,
                train_dt: n.train_dt,
                n_multistep: n.n_multistep,
                norm: meta.input_norm,
            })
        }
        ModelKind::Recon => AnyModel::Recon(ReconModel {
            net,
            spec: meta.spec,
            obs: meta.obs,
            input_norm: meta.input_norm,
            output_norm: meta.output_norm,
        }),
    };
    Ok((model, meta.provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mlp;
    use serde_json::json;

    #[test]
    fn dts_round_trip_preserves_forward_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let net = Mlp::relu_net(6, &[16], 2, 3).unwrap();
        let model = DtsModel {
            net,
            spec: EmbeddingSpec { m: 3, n_stride: 2, tau: 0.2 },
            obs: ObservationSpec::new(vec![0, 4]).unwrap(),
            input_norm: Normalization::new(vec![0.1, -0.2], vec![1.5, 2.5]).unwrap(),
            target_norm: Normalization::new(vec![0.1, -0.2], vec![1.4, 2.6]).unwrap(),
        };
        let path = dir.path().join("dts_model");
        save_dts(&model, &path, json!({"seed": 3})).unwrap();
        let (loaded, prov) = load_model(&path).unwrap();
        assert_eq!(prov["seed"], 3);
        match loaded {
            AnyModel::Dts(m) => {
                assert_eq!(m.spec, model.spec);
                assert_eq!(m.obs, model.obs);
                let x = vec![0.3, -0.5, 0.1, 0.9, -0.2, 0.7];
                let a = model.net.forward(&x).unwrap();
                let b = m.net.forward(&x).unwrap();
                for (p, q) in a.iter().zip(b.iter()) {
                    assert_eq!(p.to_bits(), q.to_bits());
                }
            }
            other => panic!("wrong kind: {:?}", other.kind()),
        }
    }

    #[test]
    fn node_round_trip_keeps_flow_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let net = Mlp::relu_net(4, &[8], 4, 1).unwrap();
        let model = NodeModel {
            net,
            damping_a: 1e-3,
            spec: EmbeddingSpec { m: 4, n_stride: 1, tau: 0.1 },
            obs: ObservationSpec::new(vec![0]).unwrap(),
            train_dt: 0.1,
            n_multistep: 2,
            norm: Normalization::new(vec![0.0], vec![7.9]).unwrap(),
        };
        let path = dir.path().join("node_model");
        save_node(&model, &path, serde_json::Value::Null).unwrap();
        match load_model(&path).unwrap().0 {
            AnyModel::Node(m) => {
                assert_eq!(m.damping_a, 1e-3);
                assert_eq!(m.n_multistep, 2);
                assert_eq!(m.train_dt, 0.1);
                assert_eq!(m.norm.scale, vec![7.9]);
            }
            other => panic!("wrong kind: {:?}", other.kind()),
        }
    }
}
