//! Standalone rollout from a saved model file.

use std::path::{Path, PathBuf};

use delaycast_core::dynsys::IntegratorConfig;
use delaycast_core::embedding::split_chronological;
use delaycast_core::models::{dts_rollout, load_model, node_integrate, true_embeddings, AnyModel};
use delaycast_core::timeseries::TimeSeries;

/// Initial-condition selector: the k-th held-out test window of a truth
/// partial series, or an explicit series file whose tail is embedded.
pub enum InitSpec {
    TestWindow { truth_partial: PathBuf, index: usize },
    SeriesTail { path: PathBuf },
}

impl InitSpec {
    pub fn parse(s: &str) -> anyhow::Result<InitSpec> {
        if let Some(rest) = s.strip_prefix("test:") {
            let (path, idx) = rest
                .rsplit_once(':')
                .ok_or_else(|| anyhow::anyhow!("expected test:<partial.json>:<index>"))?;
            Ok(InitSpec::TestWindow { truth_partial: PathBuf::from(path), index: idx.parse()? })
        } else {
            Ok(InitSpec::SeriesTail { path: PathBuf::from(s) })
        }
    }
}

pub fn cmd_rollout(
    model_path: &Path,
    init: &InitSpec,
    duration: f64,
    sample_dt: Option<f64>,
    out_path: &Path,
) -> anyhow::Result<()> {
    let (model, _prov) = load_model(model_path)?;
    let (spec, obs_dim) = match &model {
        AnyModel::Dts(m) => (m.spec, m.obs.dim()),
        AnyModel::Node(m) => (m.spec, m.obs.dim()),
        AnyModel::Recon(_) => anyhow::bail!("reconstruction models cannot be rolled out"),
    };

    let u_d0: Vec<f64> = match init {
        InitSpec::TestWindow { truth_partial, index } => {
            let partial = TimeSeries::load(truth_partial)?;
            let embeds = true_embeddings(&partial, &spec)?;
            let (train_end, n) = split_chronological(embeds.nrows());
            let row = train_end + index;
            if row >= n {
                anyhow::bail!("test window {index} out of range ({} available)", n - train_end);
            }
            embeds.row(row).to_vec()
        }
        InitSpec::SeriesTail { path } => {
            let series = TimeSeries::load(path)?;
            let embeds = true_embeddings(&series, &spec)?;
            embeds.row(embeds.nrows() - 1).to_vec()
        }
    };

    let rollout = match &model {
        AnyModel::Dts(m) => {
            let n_steps = (duration / spec.tau).round() as usize;
            dts_rollout(m, &u_d0, n_steps)?
        }
        AnyModel::Node(m) => {
            let dt = sample_dt.unwrap_or(spec.tau);
            node_integrate(m, &u_d0, duration, dt, &IntegratorConfig::default())?
        }
        AnyModel::Recon(_) => unreachable!(),
    };
    if let Some(step) = rollout.diverged_at {
        log::warn!("rollout diverged at step {step}; series truncated");
    }
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    rollout.series.save(out_path)?;
    println!(
        "rollout: {} samples x {} channels (diverged: {}) -> {}",
        rollout.series.n_samples(),
        obs_dim,
        rollout.diverged_at.is_some(),
        out_path.display()
    );
    Ok(())
}
