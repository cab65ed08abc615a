//! Pipeline stages. Each command validates upstream stages via the manifest,
//! is idempotent given fresh artifacts, and refuses stale-config overwrites
//! unless forced.

pub mod embed;
pub mod evaluate;
pub mod reproduce;
pub mod rollout;
pub mod simulate;
pub mod train;

pub use embed::cmd_embed;
pub use evaluate::cmd_evaluate;
pub use reproduce::cmd_reproduce;
pub use rollout::cmd_rollout;
pub use simulate::cmd_simulate;
pub use train::cmd_train;

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

pub const STAGE_SIMULATE: &str = "simulate";
pub const STAGE_EMBED: &str = "embed";

pub fn stage_train(kind: delaycast_core::models::ModelKind) -> String {
    format!("train_{kind}")
}

/// Shared command context.
pub struct Ctx {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub force: bool,
}

impl Ctx {
    pub fn new(config: ExperimentConfig, out_dir: &Path, force: bool) -> anyhow::Result<Ctx> {
        config.validate()?;
        let config_hash = config.hash()?;
        std::fs::create_dir_all(out_dir)?;
        // Keep the resolved config alongside the artifacts.
        config.save(&out_dir.join("config.json"))?;
        Ok(Ctx { config, config_hash, out_dir: out_dir.to_path_buf(), force })
    }

    pub fn manifest(&self) -> anyhow::Result<RunManifest> {
        RunManifest::load_or_new(&self.out_dir, &self.config_hash)
    }

    pub fn subdir(&self, name: &str) -> anyhow::Result<PathBuf> {
        let dir = self.out_dir.join(name);
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Relative paths for both halves of a JSON+binary artifact pair.
    pub fn pair(rel_stem: &str) -> [PathBuf; 2] {
        [PathBuf::from(format!("{rel_stem}.json")), PathBuf::from(format!("{rel_stem}.bin"))]
    }
}

pub fn truth_path(out_dir: &Path) -> PathBuf {
    out_dir.join("data/truth.json")
}

pub fn baseline_path(out_dir: &Path) -> PathBuf {
    out_dir.join("data/baseline.json")
}

pub fn partial_path(out_dir: &Path, obs_set: &str) -> PathBuf {
    out_dir.join(format!("embed/{obs_set}/partial.json"))
}

pub fn model_stem(out_dir: &Path, kind: delaycast_core::models::ModelKind, label: &str, seed: u64) -> PathBuf {
    out_dir.join(format!("models/{kind}_{label}_seed{seed}"))
}
