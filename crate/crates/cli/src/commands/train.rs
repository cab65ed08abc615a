//! Training over the sweep: one model file + loss-history CSV per
//! (kind, cell, seed).

use std::path::PathBuf;

use serde_json::json;

use delaycast_core::embedding::EmbeddingSpec;
use delaycast_core::models::{
    dts_train, node_train, recon_train, save_dts, save_node, save_recon, DtsTrainOptions,
    ModelKind, NodeTrainOptions, ReconTrainOptions,
};
use delaycast_core::nn::TrainHistory;
use delaycast_core::timeseries::TimeSeries;

use crate::commands::{
    model_stem, partial_path, stage_train, truth_path, Ctx, STAGE_EMBED, STAGE_SIMULATE,
};
use crate::csvio::{fmt, CsvTable};

fn history_csv(history: &TrainHistory, path: &std::path::Path) -> anyhow::Result<()> {
    let mut table = CsvTable::new(&["epoch", "train_mse", "test_mse", "lr"]);
    for e in &history.epochs {
        table.push(vec![e.epoch.to_string(), fmt(e.train_mse), fmt(e.test_mse), fmt(e.lr)]);
    }
    table.write(path)?;
    Ok(())
}

pub fn cmd_train(ctx: &Ctx, kind: ModelKind, seed_filter: Option<u64>) -> anyhow::Result<()> {
    let mut manifest = ctx.manifest()?;
    manifest.require_stage(&ctx.out_dir, STAGE_SIMULATE, &ctx.config_hash)?;
    manifest.require_stage(&ctx.out_dir, STAGE_EMBED, &ctx.config_hash)?;
    let stage = stage_train(kind);
    if manifest.stage_is_fresh(&ctx.out_dir, &stage, &ctx.config_hash) && !ctx.force && seed_filter.is_none() {
        println!("train[{kind}]: up to date (skipped)");
        return Ok(());
    }
    manifest.check_stage_overwrite(&stage, &ctx.config_hash, ctx.force)?;
    if !ctx.config.models.kinds.contains(&kind) {
        anyhow::bail!("model kind {kind} is not enabled in this config");
    }
    ctx.subdir("models")?;

    let truth = TimeSeries::load(truth_path(&ctx.out_dir))?;
    let seeds: Vec<u64> = match seed_filter {
        Some(s) => vec![s],
        None => ctx.config.seeds.clone(),
    };

    let mut artifacts: Vec<PathBuf> = Vec::new();
    for cell in &ctx.config.sweep {
        let obs = ctx.config.observation(&cell.obs_set)?;
        let partial = TimeSeries::load(partial_path(&ctx.out_dir, &cell.obs_set))?;
        let spec = EmbeddingSpec::new(cell.m, cell.n_stride, partial.dt)?;
        for &seed in &seeds {
            let stem = model_stem(&ctx.out_dir, kind, &cell.label(), seed);
            let rel_stem = stem.strip_prefix(&ctx.out_dir)?.to_path_buf();
            let provenance = json!({
                "config_hash": ctx.config_hash,
                "cell": cell,
                "seed": seed,
                "threads": delaycast_core::eval::eval_threads(),
                "kind": kind.to_string(),
            });
            let history = match kind {
                ModelKind::Dts => {
                    let opts = DtsTrainOptions {
                        hidden: ctx.config.models.dts.hidden.clone(),
                        train: ctx.config.models.dts.train.with_seed(seed),
                        normalize: true,
                    };
                    let res = dts_train(&partial, &spec, &obs, &opts)?;
                    save_dts(&res.model, &stem, provenance)?;
                    println!(
                        "train[dts] {} seed {seed}: raw test mse {:.3e}",
                        cell.label(),
                        res.test_mse_raw
                    );
                    res.history
                }
                ModelKind::Node => {
                    let nc = &ctx.config.models.node;
                    let opts = NodeTrainOptions {
                        hidden: nc.hidden.clone(),
                        n_multistep: nc.n_multistep,
                        damping_a: nc.damping_a,
                        train: nc.train.with_seed(seed),
                        normalize: true,
                        eval_every: nc.eval_every,
                    };
                    let res = node_train(&partial, &spec, &obs, &opts)?;
                    save_node(&res.model, &stem, provenance)?;
                    println!(
                        "train[node] {} seed {seed}: final multi-step loss {:.3e} ({} skipped)",
                        cell.label(),
                        res.history.final_train_mse().unwrap_or(f64::NAN),
                        res.skipped_batches
                    );
                    res.history
                }
                ModelKind::Recon => {
                    let opts = ReconTrainOptions {
                        hidden: ctx.config.models.recon.hidden.clone(),
                        train: ctx.config.models.recon.train.with_seed(seed),
                        normalize: true,
                    };
                    let res = recon_train(&partial, &truth, &spec, &obs, &opts)?;
                    save_recon(&res.model, &stem, provenance)?;
                    println!(
                        "train[recon] {} seed {seed}: raw test mse {:.3e}",
                        cell.label(),
                        res.test_mse_raw
                    );
                    res.history
                }
            };
            let hist_rel = rel_stem.with_extension("history.csv");
            history_csv(&history, &ctx.out_dir.join(&hist_rel))?;
            artifacts.push(rel_stem.with_extension("json"));
            artifacts.push(rel_stem.with_extension("weights"));
            artifacts.push(hist_rel);
        }
    }

    // Partial (filtered) runs do not overwrite the stage record: the stage is
    // complete only when every seed in the config has been trained.
    if seed_filter.is_none() {
        manifest.record_stage(&ctx.out_dir, &stage, &ctx.config_hash, &artifacts)?;
    }
    println!("train[{kind}]: wrote {} artifacts", artifacts.len());
    Ok(())
}
