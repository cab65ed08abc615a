//! Ground-truth generation: the training trajectory plus an independent
//! baseline run (different seed) used for the KL noise floor.

use std::path::PathBuf;

use delaycast_core::dynsys::{simulate_kse, simulate_lorenz};
use delaycast_core::timeseries::TimeSeries;

use crate::commands::{baseline_path, truth_path, Ctx, STAGE_SIMULATE};
use crate::config::SystemConfig;

pub fn simulate_system(system: &SystemConfig, seed_override: Option<u64>) -> anyhow::Result<TimeSeries> {
    Ok(match system {
        SystemConfig::Lorenz { params, n_samples, sample_dt, transient_discard, seed } => {
            simulate_lorenz(
                params,
                *n_samples,
                *sample_dt,
                *transient_discard,
                seed_override.unwrap_or(*seed),
            )?
        }
        SystemConfig::Kse { params, n_samples, sample_dt, transient_discard, seed } => simulate_kse(
            params,
            *n_samples,
            *sample_dt,
            *transient_discard,
            seed_override.unwrap_or(*seed),
        )?,
    })
}

pub fn cmd_simulate(ctx: &Ctx) -> anyhow::Result<()> {
    let mut manifest = ctx.manifest()?;
    if manifest.stage_is_fresh(&ctx.out_dir, STAGE_SIMULATE, &ctx.config_hash) && !ctx.force {
        log::info!("simulate: artifacts up to date, skipping");
        println!("simulate: up to date (skipped)");
        return Ok(());
    }
    manifest.check_stage_overwrite(STAGE_SIMULATE, &ctx.config_hash, ctx.force)?;
    ctx.subdir("data")?;

    let truth = simulate_system(&ctx.config.system, None)?;
    truth.save(truth_path(&ctx.out_dir))?;
    log::info!("simulate: truth {} samples x {} channels", truth.n_samples(), truth.n_channels());

    let baseline = simulate_system(&ctx.config.system, Some(ctx.config.evaluation.baseline_seed))?;
    baseline.save(baseline_path(&ctx.out_dir))?;

    let mut artifacts: Vec<PathBuf> = Vec::new();
    artifacts.extend(Ctx::pair("data/truth"));
    artifacts.extend(Ctx::pair("data/baseline"));
    manifest.record_stage(&ctx.out_dir, STAGE_SIMULATE, &ctx.config_hash, &artifacts)?;
    println!(
        "simulate: wrote truth + baseline ({} samples x {} channels)",
        truth.n_samples(),
        truth.n_channels()
    );
    Ok(())
}
