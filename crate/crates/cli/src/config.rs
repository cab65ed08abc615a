//! Experiment configuration: one JSON document drives simulate -> embed ->
//! train -> evaluate. Presets at two scales are built in: `desk` shrinks
//! budgets (10^5 samples, width 64/128, 200 epochs) for workstation runs,
//! `paper` carries the full-scale protocols.

use serde::{Deserialize, Serialize};

use delaycast_core::dynsys::{KseParams, LorenzParams};
use delaycast_core::embedding::ObservationSpec;
use delaycast_core::eval::PdfVariables;
use delaycast_core::models::ModelKind;
use delaycast_core::nn::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SystemKind {
    Lorenz,
    Kse,
    Kse44,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    Lorenz {
        params: LorenzParams,
        n_samples: usize,
        sample_dt: f64,
        transient_discard: usize,
        seed: u64,
    },
    Kse {
        params: KseParams,
        n_samples: usize,
        sample_dt: f64,
        transient_discard: usize,
        seed: u64,
    },
}

impl SystemConfig {
    pub fn sample_dt(&self) -> f64 {
        match self {
            SystemConfig::Lorenz { sample_dt, .. } => *sample_dt,
            SystemConfig::Kse { sample_dt, .. } => *sample_dt,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SystemConfig::Lorenz { seed, .. } => *seed,
            SystemConfig::Kse { seed, .. } => *seed,
        }
    }
}

/// A named channel subset, e.g. "x" -> [0] or "dp4" -> evenly spaced 4.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationSet {
    pub name: String,
    pub channel_indices: Vec<usize>,
}

impl ObservationSet {
    pub fn spec(&self) -> anyhow::Result<ObservationSpec> {
        Ok(ObservationSpec::new(self.channel_indices.clone())?)
    }
}

/// One sweep cell: which observation set, how many delays, delay stride.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCell {
    pub obs_set: String,
    pub m: usize,
    pub n_stride: usize,
}

impl SweepCell {
    pub fn label(&self) -> String {
        format!("{}_m{}_s{}", self.obs_set, self.m, self.n_stride)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingAnalysisConfig {
    /// Channel (within each observation set) for the MI scan.
    pub mi_max_lag: usize,
    pub mi_bins: usize,
    pub fnn_m_max: usize,
    pub fnn_rtol: f64,
    pub fnn_atol: f64,
    pub fnn_max_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
}

impl TrainParams {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            lr_decay_factor: self.lr_decay_factor,
            lr_decay_every: self.lr_decay_every,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtsConfig {
    pub hidden: Vec<usize>,
    pub train: TrainParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeConfig {
    pub hidden: Vec<usize>,
    pub n_multistep: usize,
    pub damping_a: f64,
    pub train: TrainParams,
    pub eval_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelsConfig {
    pub kinds: Vec<ModelKind>,
    pub dts: DtsConfig,
    pub node: NodeConfig,
    pub recon: DtsConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationConfig {
    /// Tracking horizon in time units.
    pub horizon: f64,
    pub n_ensembles: usize,
    /// Long-rollout duration in time units for attractor statistics.
    pub long_run_duration: f64,
    pub n_bins: usize,
    pub autocorr_max_lag: usize,
    pub collapse_window: f64,
    /// Seed for the independent truth run behind the KL baseline.
    pub baseline_seed: u64,
    pub pdf: PdfVariables,
    /// Cells evaluated with long-run statistics; defaults to every sweep cell.
    pub eval_cells: Option<Vec<SweepCell>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    pub system: SystemConfig,
    pub observations: Vec<ObservationSet>,
    pub analysis: EmbeddingAnalysisConfig,
    pub sweep: Vec<SweepCell>,
    pub models: ModelsConfig,
    pub evaluation: EvaluationConfig,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.version != CONFIG_VERSION {
            anyhow::bail!("config version {} unsupported (expected {CONFIG_VERSION})", self.version);
        }
        if self.sweep.is_empty() || self.seeds.is_empty() {
            anyhow::bail!("sweep and seeds must be non-empty");
        }
        for cell in &self.sweep {
            if !self.observations.iter().any(|o| o.name == cell.obs_set) {
                anyhow::bail!("sweep cell references unknown observation set {:?}", cell.obs_set);
            }
        }
        if let Some(cells) = &self.evaluation.eval_cells {
            for cell in cells {
                if !self.sweep.contains(cell) {
                    anyhow::bail!("eval cell {:?} is not in the sweep", cell.label());
                }
            }
        }
        for set in &self.observations {
            set.spec()?;
        }
        Ok(())
    }

    pub fn observation(&self, name: &str) -> anyhow::Result<ObservationSpec> {
        self.observations
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| anyhow::anyhow!("unknown observation set {name:?}"))?
            .spec()
    }

    pub fn eval_cells(&self) -> Vec<SweepCell> {
        self.evaluation.eval_cells.clone().unwrap_or_else(|| self.sweep.clone())
    }

    /// Canonical hash over the serialized config; JSON field order is fixed
    /// by the struct definitions, so this is deterministic.
    pub fn hash(&self) -> anyhow::Result<String> {
        let canonical = serde_json::to_string(self)?;
        Ok(delaycast_core::nn::sha256_hex(canonical.as_bytes()))
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &std::path::Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn builtin(system: SystemKind, preset: Preset) -> ExperimentConfig {
        match (system, preset) {
            (SystemKind::Lorenz, Preset::Desk) => lorenz_desk(),
            (SystemKind::Lorenz, Preset::Paper) => lorenz_paper(),
            (SystemKind::Kse, Preset::Desk) => kse_desk(),
            (SystemKind::Kse, Preset::Paper) => kse_paper(),
            (SystemKind::Kse44, _) => kse44_paper(),
        }
    }
}

fn lorenz_observations() -> Vec<ObservationSet> {
    vec![
        ObservationSet { name: "x".into(), channel_indices: vec![0] },
        ObservationSet { name: "y".into(), channel_indices: vec![1] },
        ObservationSet { name: "z".into(), channel_indices: vec![2] },
    ]
}

fn lorenz_sweep() -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for obs in ["x", "y", "z"] {
        for m in 1..=6 {
            cells.push(SweepCell { obs_set: obs.into(), m, n_stride: 1 });
        }
    }
    cells
}

/// Desk scale: 10^5 samples, width 64, 200 epochs.
pub fn lorenz_desk() -> ExperimentConfig {
    ExperimentConfig {
        version: CONFIG_VERSION,
        name: "lorenz_desk".into(),
        system: SystemConfig::Lorenz {
            params: LorenzParams::default(),
            n_samples: 100_000,
            sample_dt: 0.1,
            transient_discard: 10_000,
            seed: 1,
        },
        observations: lorenz_observations(),
        analysis: EmbeddingAnalysisConfig {
            mi_max_lag: 20,
            mi_bins: 16,
            fnn_m_max: 6,
            fnn_rtol: 10.0,
            fnn_atol: 2.0,
            fnn_max_points: 10_000,
        },
        sweep: lorenz_sweep(),
        models: ModelsConfig {
            kinds: vec![ModelKind::Dts, ModelKind::Node, ModelKind::Recon],
            dts: DtsConfig {
                hidden: vec![64, 64],
                train: TrainParams {
                    epochs: 200,
                    batch_size: 256,
                    lr0: 1e-3,
                    lr_decay_factor: 0.5,
                    lr_decay_every: 100,
                },
            },
            node: NodeConfig {
                hidden: vec![64, 64, 64],
                n_multistep: 2,
                damping_a: 1e-3,
                train: TrainParams {
                    epochs: 5_000,
                    batch_size: 100,
                    lr0: 1e-3,
                    lr_decay_factor: 0.5,
                    lr_decay_every: 1_000,
                },
                eval_every: 250,
            },
            recon: DtsConfig {
                hidden: vec![64, 64],
                train: TrainParams {
                    epochs: 200,
                    batch_size: 256,
                    lr0: 1e-3,
                    lr_decay_factor: 0.5,
                    lr_decay_every: 100,
                },
            },
        },
        evaluation: EvaluationConfig {
            horizon: 10.0,
            n_ensembles: 500,
            long_run_duration: 10_000.0,
            n_bins: 100,
            autocorr_max_lag: 50,
            collapse_window: 100.0,
            baseline_seed: 77,
            pdf: PdfVariables::Channels { a: 0, b: 1 },
            eval_cells: Some(vec![
                SweepCell { obs_set: "x".into(), m: 3, n_stride: 1 },
                SweepCell { obs_set: "y".into(), m: 4, n_stride: 1 },
            ]),
        },
        seeds: vec![1, 2, 3, 4, 5],
    }
}

/// Full-scale protocol: 5x10^5 samples, width 200, 1000 epochs, NODE 50k
/// iterations.
pub fn lorenz_paper() -> ExperimentConfig {
    let mut cfg = lorenz_desk();
    cfg.name = "lorenz_paper".into();
    cfg.system = SystemConfig::Lorenz {
        params: LorenzParams::default(),
        n_samples: 500_000,
        sample_dt: 0.1,
        transient_discard: 10_000,
        seed: 1,
    };
    cfg.models.dts = DtsConfig {
        hidden: vec![200, 200],
        train: TrainParams {
            epochs: 1000,
            batch_size: 256,
            lr0: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 100,
        },
    };
    cfg.models.recon = cfg.models.dts.clone();
    cfg.models.node = NodeConfig {
        hidden: vec![200, 200, 200],
        n_multistep: 2,
        damping_a: 1e-3,
        train: TrainParams {
            epochs: 50_000,
            batch_size: 100,
            lr0: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 10_000,
        },
        eval_every: 1_000,
    };
    cfg.evaluation.long_run_duration = 50_000.0;
    cfg.evaluation.n_ensembles = 2_000;
    cfg
}

fn kse_observations(n_grid: usize, dps: &[usize]) -> Vec<ObservationSet> {
    dps.iter()
        .map(|&d_p| ObservationSet {
            name: format!("dp{d_p}"),
            channel_indices: (0..d_p).map(|i| i * (n_grid / d_p)).collect(),
        })
        .collect()
}

/// Desk scale KSE L = 22: 10^5 samples, width 128, 200 epochs.
pub fn kse_desk() -> ExperimentConfig {
    // tau = 1.5 (6 samples) for the loss sweep; tau = 4.0 (16 samples) for
    // the d_p = 4, 8 statistics cells.
    let sweep = vec![
        SweepCell { obs_set: "dp1".into(), m: 8, n_stride: 6 },
        SweepCell { obs_set: "dp1".into(), m: 16, n_stride: 6 },
        SweepCell { obs_set: "dp2".into(), m: 8, n_stride: 6 },
        SweepCell { obs_set: "dp4".into(), m: 1, n_stride: 6 },
        SweepCell { obs_set: "dp4".into(), m: 2, n_stride: 6 },
        SweepCell { obs_set: "dp4".into(), m: 4, n_stride: 6 },
        SweepCell { obs_set: "dp8".into(), m: 2, n_stride: 6 },
        SweepCell { obs_set: "dp4".into(), m: 4, n_stride: 16 },
        SweepCell { obs_set: "dp8".into(), m: 2, n_stride: 16 },
    ];
    ExperimentConfig {
        version: CONFIG_VERSION,
        name: "kse_desk".into(),
        system: SystemConfig::Kse {
            params: KseParams { l: 22.0, n_grid: 64, dt: 0.25 },
            n_samples: 100_000,
            sample_dt: 0.25,
            transient_discard: 4_000,
            seed: 1,
        },
        observations: kse_observations(64, &[1, 2, 4, 8]),
        analysis: EmbeddingAnalysisConfig {
            mi_max_lag: 40,
            mi_bins: 16,
            fnn_m_max: 8,
            fnn_rtol: 10.0,
            fnn_atol: 2.0,
            fnn_max_points: 10_000,
        },
        sweep,
        models: ModelsConfig {
            kinds: vec![ModelKind::Dts, ModelKind::Node, ModelKind::Recon],
            dts: DtsConfig {
                hidden: vec![128, 128, 128, 128],
                train: TrainParams {
                    epochs: 200,
                    batch_size: 256,
                    lr0: 1e-3,
                    lr_decay_factor: 0.5,
                    lr_decay_every: 100,
                },
            },
            node: NodeConfig {
                hidden: vec![128, 128, 128, 128],
                n_multistep: 20,
                damping_a: 1e-3,
                train: TrainParams {
                    epochs: 5_000,
                    batch_size: 100,
                    lr0: 1e-3,
                    lr_decay_factor: 0.5,
                    lr_decay_every: 1_000,
                },
                eval_every: 500,
            },
            recon: DtsConfig {
                hidden: vec![128, 128, 128, 128],
                train: TrainParams {
                    epochs: 200,
                    batch_size: 256,
                    lr0: 1e-3,
                    lr_decay_factor: 0.5,
                    lr_decay_every: 100,
                },
            },
        },
        evaluation: EvaluationConfig {
            horizon: 50.0,
            n_ensembles: 200,
            long_run_duration: 25_000.0,
            n_bins: 100,
            autocorr_max_lag: 40,
            collapse_window: 500.0,
            baseline_seed: 78,
            pdf: PdfVariables::SpatialDerivatives { domain_length: 22.0 },
            eval_cells: Some(vec![
                SweepCell { obs_set: "dp2".into(), m: 8, n_stride: 6 },
                SweepCell { obs_set: "dp4".into(), m: 4, n_stride: 16 },
                SweepCell { obs_set: "dp8".into(), m: 2, n_stride: 16 },
            ]),
        },
        seeds: vec![1],
    }
}

/// Full-scale KSE L = 22: 4x10^5 samples, width 256 x 4, 1000 epochs, NODE
/// 200k iterations with N = 20.
pub fn kse_paper() -> ExperimentConfig {
    let mut cfg = kse_desk();
    cfg.name = "kse_paper".into();
    cfg.system = SystemConfig::Kse {
        params: KseParams { l: 22.0, n_grid: 64, dt: 0.25 },
        n_samples: 400_000,
        sample_dt: 0.25,
        transient_discard: 10_000,
        seed: 1,
    };
    let train = TrainParams {
        epochs: 1000,
        batch_size: 256,
        lr0: 1e-3,
        lr_decay_factor: 0.5,
        lr_decay_every: 100,
    };
    cfg.models.dts = DtsConfig { hidden: vec![256, 256, 256, 256], train: train.clone() };
    cfg.models.recon = DtsConfig { hidden: vec![256, 256, 256, 256], train };
    cfg.models.node = NodeConfig {
        hidden: vec![256, 256, 256, 256],
        n_multistep: 20,
        damping_a: 1e-3,
        train: TrainParams {
            epochs: 200_000,
            batch_size: 100,
            lr0: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 25_000,
        },
        eval_every: 5_000,
    };
    cfg.evaluation.long_run_duration = 100_000.0;
    cfg.seeds = vec![1, 2, 3, 4, 5];
    cfg
}

/// KSE L = 44 at full scale (width 512). Same code paths as L = 22; the
/// sweep follows the d_p * m = 32 cells.
pub fn kse44_paper() -> ExperimentConfig {
    let mut cfg = kse_paper();
    cfg.name = "kse44_paper".into();
    cfg.system = SystemConfig::Kse {
        params: KseParams { l: 44.0, n_grid: 64, dt: 0.25 },
        n_samples: 400_000,
        sample_dt: 0.25,
        transient_discard: 10_000,
        seed: 1,
    };
    cfg.observations = kse_observations(64, &[4, 8, 16]);
    // tau = 1.25 (5 samples) for dp4, tau = 2.5 (10 samples) for dp8/dp16.
    cfg.sweep = vec![
        SweepCell { obs_set: "dp4".into(), m: 8, n_stride: 5 },
        SweepCell { obs_set: "dp8".into(), m: 4, n_stride: 10 },
        SweepCell { obs_set: "dp16".into(), m: 2, n_stride: 10 },
    ];
    let train = TrainParams {
        epochs: 1000,
        batch_size: 256,
        lr0: 1e-3,
        lr_decay_factor: 0.5,
        lr_decay_every: 100,
    };
    cfg.models.dts = DtsConfig { hidden: vec![512, 512, 512, 512], train: train.clone() };
    cfg.models.recon = DtsConfig { hidden: vec![512, 512, 512, 512], train };
    cfg.models.node.hidden = vec![512, 512, 512, 512];
    cfg.evaluation.pdf = PdfVariables::SpatialDerivatives { domain_length: 44.0 };
    cfg.evaluation.eval_cells = Some(cfg.sweep.clone());
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_configs_validate() {
        for (sys, preset) in [
            (SystemKind::Lorenz, Preset::Desk),
            (SystemKind::Lorenz, Preset::Paper),
            (SystemKind::Kse, Preset::Desk),
            (SystemKind::Kse, Preset::Paper),
            (SystemKind::Kse44, Preset::Paper),
        ] {
            let cfg = ExperimentConfig::builtin(sys, preset);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn config_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = lorenz_desk();
        let path = dir.path().join("config.json");
        cfg.save(&path).unwrap();
        let back = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.hash().unwrap(), back.hash().unwrap());
        // parse(serialize(parse(...))) fixed point.
        let path2 = dir.path().join("config2.json");
        back.save(&path2).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            std::fs::read_to_string(&path2).unwrap()
        );
    }
}
