//! Projection, embedding-parameter analysis (MI + FNN), and delay-dataset
//! construction for every sweep cell.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use delaycast_core::embedding::{
    build_embedding, false_nearest_neighbors_capped, first_minimum, mutual_information, project,
    EmbeddingSpec, ObservationSpec, TargetMode,
};
use delaycast_core::timeseries::TimeSeries;

use crate::commands::{partial_path, truth_path, Ctx, STAGE_EMBED, STAGE_SIMULATE};
use crate::csvio::{fmt, CsvTable};

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub obs_set: String,
    pub mi_curve: Vec<f64>,
    /// Lag of the first MI minimum; a monotone MI curve fails the command.
    pub mi_first_minimum_lag: usize,
    pub suggested_tau: f64,
    /// FNN fraction for m = 1..=m_max.
    pub fnn_fraction: Vec<f64>,
    /// Smallest m with FNN below 1%, when reached.
    pub suggested_m: Option<usize>,
}

pub fn cmd_embed(ctx: &Ctx) -> anyhow::Result<()> {
    let mut manifest = ctx.manifest()?;
    manifest.require_stage(&ctx.out_dir, STAGE_SIMULATE, &ctx.config_hash)?;
    if manifest.stage_is_fresh(&ctx.out_dir, STAGE_EMBED, &ctx.config_hash) && !ctx.force {
        println!("embed: up to date (skipped)");
        return Ok(());
    }
    manifest.check_stage_overwrite(STAGE_EMBED, &ctx.config_hash, ctx.force)?;

    let truth = TimeSeries::load(truth_path(&ctx.out_dir))?;
    let analysis = &ctx.config.analysis;
    let mut artifacts: Vec<PathBuf> = Vec::new();

    for set in &ctx.config.observations {
        let obs = set.spec()?;
        let partial = project(&truth, &obs)?;
        ctx.subdir(&format!("embed/{}", set.name))?;
        partial.save(partial_path(&ctx.out_dir, &set.name))?;
        artifacts.extend(Ctx::pair(&format!("embed/{}/partial", set.name)));

        // MI on the first channel of the set; FNN over the whole set. A
        // monotone MI curve has no delay to suggest and fails the command.
        let mi = mutual_information(&partial, 0, analysis.mi_max_lag, analysis.mi_bins)?;
        let mi_lag = first_minimum(&mi)?;
        let fnn = false_nearest_neighbors_capped(
            &partial,
            &ObservationSpec::new((0..obs.dim()).collect())?,
            mi_lag.max(1),
            analysis.fnn_m_max,
            analysis.fnn_rtol,
            analysis.fnn_atol,
            analysis.fnn_max_points,
        )?;
        let report = EmbeddingReport {
            obs_set: set.name.clone(),
            mi_first_minimum_lag: mi_lag,
            suggested_tau: mi_lag as f64 * truth.dt,
            suggested_m: fnn.iter().position(|f| *f < 0.01).map(|i| i + 1),
            mi_curve: mi,
            fnn_fraction: fnn,
        };
        let report_rel = format!("embed/{}/analysis.json", set.name);
        std::fs::write(
            ctx.out_dir.join(&report_rel),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
        artifacts.push(PathBuf::from(report_rel));
        println!(
            "embed[{}]: MI minimum at lag {}, FNN suggests m = {:?}",
            set.name, report.mi_first_minimum_lag, report.suggested_m
        );

        // MI/FNN curves as plot-ready CSV.
        let mut mi_csv = CsvTable::new(&["lag", "mi_nats"]);
        for (lag, v) in report.mi_curve.iter().enumerate() {
            mi_csv.push(vec![lag.to_string(), fmt(*v)]);
        }
        let mi_rel = format!("embed/{}/mi.csv", set.name);
        mi_csv.write(&ctx.out_dir.join(&mi_rel))?;
        artifacts.push(PathBuf::from(mi_rel));
        let mut fnn_csv = CsvTable::new(&["m", "fnn_fraction"]);
        for (i, v) in report.fnn_fraction.iter().enumerate() {
            fnn_csv.push(vec![(i + 1).to_string(), fmt(*v)]);
        }
        let fnn_rel = format!("embed/{}/fnn.csv", set.name);
        fnn_csv.write(&ctx.out_dir.join(&fnn_rel))?;
        artifacts.push(PathBuf::from(fnn_rel));
    }

    // Next-step delay datasets for every sweep cell.
    for cell in &ctx.config.sweep {
        let partial = TimeSeries::load(partial_path(&ctx.out_dir, &cell.obs_set))?;
        let spec = EmbeddingSpec::new(cell.m, cell.n_stride, partial.dt)?;
        let mut ds = build_embedding(
            &partial,
            &spec,
            TargetMode::NextPartial { horizon_stride: cell.n_stride },
        )?;
        ds.normalize_in_place()?;
        let rel = format!("embed/{}/dataset_{}", cell.obs_set, cell.label());
        ds.save(ctx.out_dir.join(&rel).with_extension("json"))?;
        artifacts.extend(Ctx::pair(&rel));
    }

    manifest.record_stage(&ctx.out_dir, STAGE_EMBED, &ctx.config_hash, &artifacts)?;
    println!("embed: wrote {} artifacts", artifacts.len());
    Ok(())
}
