//! Run manifest: per-stage artifact paths and checksums, keyed by the config
//! hash so stale artifacts are refused instead of silently reused.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use delaycast_core::nn::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub completed_unix: u64,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub git_describe: String,
    pub threads: usize,
    pub created_unix: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn new(config_hash: &str) -> RunManifest {
        RunManifest {
            config_hash: config_hash.to_string(),
            git_describe: git_describe(),
            threads: delaycast_core::eval::eval_threads(),
            created_unix: unix_now(),
            stages: BTreeMap::new(),
        }
    }

    pub fn load_or_new(out_dir: &Path, config_hash: &str) -> anyhow::Result<RunManifest> {
        let path = out_dir.join(MANIFEST_FILE);
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            Ok(serde_json::from_str(&text)?)
        } else {
            Ok(RunManifest::new(config_hash))
        }
    }

    pub fn save(&self, out_dir: &Path) -> anyhow::Result<()> {
        let path = out_dir.join(MANIFEST_FILE);
        let tmp = out_dir.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// A stage is fresh when it ran under the same config hash and every
    /// recorded artifact still matches its checksum.
    pub fn stage_is_fresh(&self, out_dir: &Path, stage: &str, config_hash: &str) -> bool {
        match self.stages.get(stage) {
            None => false,
            Some(rec) => {
                rec.config_hash == config_hash
                    && rec.artifacts.iter().all(|a| {
                        file_sha256(&out_dir.join(&a.path)).map(|h| h == a.sha256).unwrap_or(false)
                    })
            }
        }
    }

    /// Records a completed stage from the artifact paths (relative to the
    /// run directory).
    pub fn record_stage(
        &mut self,
        out_dir: &Path,
        stage: &str,
        config_hash: &str,
        artifact_paths: &[PathBuf],
    ) -> anyhow::Result<()> {
        let mut artifacts = Vec::with_capacity(artifact_paths.len());
        for rel in artifact_paths {
            let sha = file_sha256(&out_dir.join(rel))
                .ok_or_else(|| anyhow::anyhow!("missing artifact {}", rel.display()))?;
            artifacts.push(ArtifactRecord { path: rel.to_string_lossy().into_owned(), sha256: sha });
        }
        self.stages.insert(
            stage.to_string(),
            StageRecord { config_hash: config_hash.to_string(), completed_unix: unix_now(), artifacts },
        );
        self.save(out_dir)
    }

    /// Stale-config guard: a stage recorded under a different config hash
    /// refuses to be overwritten unless forced.
    pub fn check_stage_overwrite(&self, stage: &str, config_hash: &str, force: bool) -> anyhow::Result<()> {
        if let Some(rec) = self.stages.get(stage) {
            if rec.config_hash != config_hash && !force {
                anyhow::bail!(
                    "stage {stage:?} was produced by a different config (hash {}); \
                     pass --force to overwrite",
                    &rec.config_hash[..12.min(rec.config_hash.len())]
                );
            }
        }
        Ok(())
    }

    pub fn require_stage(&self, out_dir: &Path, stage: &str, config_hash: &str) -> anyhow::Result<()> {
        if !self.stage_is_fresh(out_dir, stage, config_hash) {
            anyhow::bail!("stage {stage:?} has not been run for this config; run it first");
        }
        Ok(())
    }
}

pub fn file_sha256(path: &Path) -> Option<String> {
    std::fs::read(path).ok().map(|bytes| sha256_hex(&bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}
