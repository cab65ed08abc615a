//! Evaluation over the trained sweep: one-step losses, ensemble tracking,
//! long-run statistics with reconstruction, KL against the data-vs-data
//! baseline, and a summary table with best-of-seeds selection by KL.

use std::path::PathBuf;

use serde_json::json;

use delaycast_core::embedding::{split_chronological, EmbeddingSpec};
use delaycast_core::eval::{
    ensemble_tracking_error, kl_divergence, long_run_statistics, model_histogram, truth_histogram,
    Histogram2D, LongRunOptions,
};
use delaycast_core::models::{
    load_model, node_loss_prime, recon_apply, true_embeddings, AnyModel, Forecaster, ModelKind,
    ReconModel,
};
use delaycast_core::timeseries::TimeSeries;

use crate::commands::{
    baseline_path, model_stem, partial_path, stage_train, truth_path, Ctx, STAGE_EMBED,
    STAGE_SIMULATE,
};
use crate::config::SweepCell;
use crate::csvio::{fmt, write_curve, CsvTable};

const STAGE_EVALUATE: &str = "evaluate";

/// Every k-th sample, matching a model cadence.
fn subsample(series: &TimeSeries, stride: usize) -> anyhow::Result<TimeSeries> {
    Ok(TimeSeries::new(
        series.values.slice(ndarray::s![..;stride, ..]).to_owned(),
        series.dt * stride as f64,
        series.t0,
    )?)
}

fn load_forecaster(ctx: &Ctx, kind: ModelKind, cell: &SweepCell, seed: u64) -> anyhow::Result<AnyModel> {
    let stem = model_stem(&ctx.out_dir, kind, &cell.label(), seed);
    Ok(load_model(&stem)?.0)
}

fn load_recon(ctx: &Ctx, cell: &SweepCell, seed: u64) -> anyhow::Result<ReconModel> {
    match load_forecaster(ctx, ModelKind::Recon, cell, seed)? {
        AnyModel::Recon(m) => Ok(m),
        _ => anyhow::bail!("model file is not a reconstruction model"),
    }
}

pub fn cmd_evaluate(ctx: &Ctx) -> anyhow::Result<()> {
    let mut manifest = ctx.manifest()?;
    manifest.require_stage(&ctx.out_dir, STAGE_SIMULATE, &ctx.config_hash)?;
    manifest.require_stage(&ctx.out_dir, STAGE_EMBED, &ctx.config_hash)?;
    for kind in &ctx.config.models.kinds {
        manifest.require_stage(&ctx.out_dir, &stage_train(*kind), &ctx.config_hash)?;
    }
    if manifest.stage_is_fresh(&ctx.out_dir, STAGE_EVALUATE, &ctx.config_hash) && !ctx.force {
        println!("evaluate: up to date (skipped)");
        return Ok(());
    }
    manifest.check_stage_overwrite(STAGE_EVALUATE, &ctx.config_hash, ctx.force)?;
    ctx.subdir("eval")?;

    let truth = TimeSeries::load(truth_path(&ctx.out_dir))?;
    let baseline = TimeSeries::load(baseline_path(&ctx.out_dir))?;
    let ev = &ctx.config.evaluation;
    let vars = &ev.pdf;

    // Truth PDF from the full-resolution truth run; its edges anchor all KLs.
    let truth_hist: Histogram2D = truth_histogram(&truth.values.view(), vars, ev.n_bins)?;

    let has_recon = ctx.config.models.kinds.contains(&ModelKind::Recon);
    let forecaster_kinds: Vec<ModelKind> = ctx
        .config
        .models
        .kinds
        .iter()
        .copied()
        .filter(|k| *k != ModelKind::Recon)
        .collect();

    let mut artifacts: Vec<PathBuf> = Vec::new();
    let mut summary = CsvTable::new(&[
        "kind",
        "cell",
        "seed",
        "one_step_mse_raw",
        "kl",
        "kl_baseline",
        "kl_recon_only",
        "collapse",
        "out_of_range_fraction",
        "track_median_mid",
        "track_median_end",
        "best_of_seeds",
    ]);

    for cell in &ctx.config.eval_cells() {
        let partial = TimeSeries::load(partial_path(&ctx.out_dir, &cell.obs_set))?;
        let spec = EmbeddingSpec::new(cell.m, cell.n_stride, partial.dt)?;
        let (train_end_samples, _) = split_chronological(partial.n_samples());
        let test_partial = partial.slice_samples(train_end_samples, partial.n_samples())?;

        // Baseline KL at the model cadence: an independent truth run,
        // subsampled to the rollout spacing, against the truth PDF.
        let baseline_cadence = subsample(&baseline, cell.n_stride)?;
        let base_hist = model_histogram(&baseline_cadence.values.view(), vars, &truth_hist)?;
        let kl_baseline = kl_divergence(&base_hist, &truth_hist)?;

        // Reconstruction-only KL per seed (true embeddings, no time stepping).
        let mut kl_recon_only = std::collections::BTreeMap::new();
        if has_recon {
            let embeds = true_embeddings(&partial, &spec)?;
            let cadenced = embeds.slice(ndarray::s![..;cell.n_stride, ..]).to_owned();
            for &seed in &ctx.config.seeds {
                let recon = load_recon(ctx, cell, seed)?;
                let states = recon_apply(&recon, &cadenced.view())?;
                let hist = model_histogram(&states.view(), vars, &truth_hist)?;
                kl_recon_only.insert(seed, kl_divergence(&hist, &truth_hist)?);
            }
        }

        for &kind in &forecaster_kinds {
            let mut pending_rows: Vec<Vec<String>> = Vec::new();
            let mut rows: Vec<(u64, f64)> = Vec::new();
            for &seed in &ctx.config.seeds {
                let model = load_forecaster(ctx, kind, cell, seed)?;
                let (one_step, report, tracking) = match &model {
                    AnyModel::Dts(m) => {
                        let one_step = m.one_step_test_mse(&partial)?;
                        let tracking =
                            ensemble_tracking_error(m, &test_partial, ev.n_ensembles, ev.horizon)?;
                        let report = long_run(ctx, m, cell, seed, &truth_hist)?;
                        (one_step, report, tracking)
                    }
                    AnyModel::Node(m) => {
                        let one_step = node_loss_prime(m, &test_partial)?;
                        let tracking =
                            ensemble_tracking_error(m, &test_partial, ev.n_ensembles, ev.horizon)?;
                        let report = long_run(ctx, m, cell, seed, &truth_hist)?;
                        (one_step, report, tracking)
                    }
                    AnyModel::Recon(_) => unreachable!(),
                };

                let label = format!("{kind}_{}_seed{seed}", cell.label());
                let (kl, collapse, oor) = match &report {
                    Some(r) => {
                        let rel = format!("eval/{label}_report.json");
                        r.save_json(ctx.out_dir.join(&rel))?;
                        artifacts.push(PathBuf::from(&rel));
                        if !r.autocorr.is_empty() {
                            let rel_ac = format!("eval/{label}_autocorr.csv");
                            write_curve(
                                &ctx.out_dir.join(&rel_ac),
                                "t",
                                &r.autocorr_lags,
                                "autocorr",
                                &r.autocorr,
                            )?;
                            artifacts.push(PathBuf::from(rel_ac));
                        }
                        (r.kl_divergence, format!("{:?}", r.collapse), r.out_of_range_fraction)
                    }
                    None => (f64::NAN, "n/a".to_string(), f64::NAN),
                };

                let rel_track = format!("eval/{label}_tracking.csv");
                write_curve(
                    &ctx.out_dir.join(&rel_track),
                    "t",
                    &tracking.times,
                    "median_error",
                    &tracking.median_error,
                )?;
                artifacts.push(PathBuf::from(rel_track));

                let mid = tracking.median_error[tracking.median_error.len() / 2];
                let end = *tracking.median_error.last().unwrap();
                pending_rows.push(vec![
                    kind.to_string(),
                    cell.label(),
                    seed.to_string(),
                    fmt(one_step),
                    fmt(kl),
                    fmt(kl_baseline),
                    kl_recon_only.get(&seed).map(|v| fmt(*v)).unwrap_or_else(|| "".into()),
                    collapse,
                    fmt(oor),
                    fmt(mid),
                    fmt(end),
                    String::new(),
                ]);
                rows.push((seed, kl));
            }
            // Best-of-seeds by KL (lowest wins, NaN sorts last).
            let best = rows
                .iter()
                .filter(|(_, kl)| kl.is_finite())
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|(seed, _)| *seed);
            for (row, (seed, _)) in pending_rows.iter_mut().zip(rows.iter()) {
                let is_best = best == Some(*seed);
                *row.last_mut().unwrap() = is_best.to_string();
            }
            for row in pending_rows {
                summary.push(row);
            }
            if let Some(best_seed) = best {
                let best_rel = format!("eval/best_{kind}_{}.json", cell.label());
                std::fs::write(
                    ctx.out_dir.join(&best_rel),
                    serde_json::to_string_pretty(&json!({
                        "kind": kind.to_string(),
                        "cell": cell,
                        "best_seed": best_seed,
                        "selection": "min KL of reconstructed joint PDF",
                    }))? + "\n",
                )?;
                artifacts.push(PathBuf::from(best_rel));
            }
        }
    }

    let summary_rel = "eval/summary.csv";
    summary.write(&ctx.out_dir.join(summary_rel))?;
    artifacts.push(PathBuf::from(summary_rel));

    // Truth histogram for external plotting.
    let th_rel = "eval/truth_pdf";
    truth_hist.save(ctx.out_dir.join(th_rel).with_extension("json"))?;
    artifacts.extend(Ctx::pair(th_rel));

    manifest.record_stage(&ctx.out_dir, STAGE_EVALUATE, &ctx.config_hash, &artifacts)?;
    println!("evaluate: wrote {} artifacts (summary at eval/summary.csv)", artifacts.len());
    Ok(())
}

/// Long-run statistics when a reconstruction model is available for the cell.
fn long_run<M: Forecaster>(
    ctx: &Ctx,
    model: &M,
    cell: &SweepCell,
    seed: u64,
    truth_hist: &Histogram2D,
) -> anyhow::Result<Option<delaycast_core::eval::EvalReport>> {
    if !ctx.config.models.kinds.contains(&ModelKind::Recon) {
        return Ok(None);
    }
    let recon = load_recon(ctx, cell, seed)?;
    let partial = TimeSeries::load(partial_path(&ctx.out_dir, &cell.obs_set))?;
    let spec = *model.spec();
    let embeds = true_embeddings(&partial, &spec)?;
    // Initial condition from the held-out test windows, never training data.
    let (train_end, _) = split_chronological(embeds.nrows());
    let u_d0: Vec<f64> = embeds.row(train_end).to_vec();
    let ev = &ctx.config.evaluation;
    let opts = LongRunOptions {
        sample_dt: spec.tau,
        n_bins: ev.n_bins,
        autocorr_max_lag: ev.autocorr_max_lag,
        collapse_window: ev.collapse_window,
    };
    let report = long_run_statistics(
        model,
        &recon,
        &u_d0,
        ev.long_run_duration,
        truth_hist,
        &ev.pdf,
        &opts,
    )?;
    Ok(Some(report))
}
