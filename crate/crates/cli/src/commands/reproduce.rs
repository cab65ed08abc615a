//! Figure-reproduction bundles: each target runs the pipeline stages it
//! needs and emits plot-ready CSVs with the curves of the corresponding
//! figure. Desk preset by default; the full-scale protocol is available via
//! --preset paper (compute-heavy).

use std::path::Path;

use delaycast_core::models::ModelKind;

use crate::commands::{cmd_embed, cmd_evaluate, cmd_simulate, cmd_train, Ctx};
use crate::config::{ExperimentConfig, Preset, SweepCell, SystemKind};
use crate::csvio::{fmt, CsvTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    /// Lorenz test loss vs embedding dimension (DTS + reconstruction).
    Fig2,
    /// Lorenz ensemble tracking error.
    Fig3,
    /// Lorenz autocorrelation, data vs models.
    Fig4,
    /// Lorenz joint-PDF KL divergence vs number of delays.
    Fig5,
    /// KSE test loss vs (d_p, m).
    Fig6,
    /// KSE ensemble tracking error.
    Fig7,
    /// KSE autocorrelation.
    Fig8,
    /// KSE L=44 joint-PDF KL divergence (paper preset only).
    Fig11,
}

impl FigureId {
    fn system(self) -> SystemKind {
        match self {
            FigureId::Fig2 | FigureId::Fig3 | FigureId::Fig4 | FigureId::Fig5 => SystemKind::Lorenz,
            FigureId::Fig6 | FigureId::Fig7 | FigureId::Fig8 => SystemKind::Kse,
            FigureId::Fig11 => SystemKind::Kse44,
        }
    }
}

/// Trims the built-in config to the cells a figure actually needs.
fn figure_config(figure: FigureId, preset: Preset) -> anyhow::Result<ExperimentConfig> {
    if figure == FigureId::Fig11 && preset != Preset::Paper {
        anyhow::bail!(
            "fig11 (KSE L=44) is not desk-reproducible; rerun with --preset paper \
             (expect a long run)"
        );
    }
    let mut cfg = ExperimentConfig::builtin(figure.system(), preset);
    match figure {
        FigureId::Fig2 | FigureId::Fig5 => {
            cfg.models.kinds = vec![ModelKind::Dts, ModelKind::Recon];
            if figure == FigureId::Fig5 {
                // KL sweep needs long rollouts on the x/y cells at every m.
                cfg.evaluation.eval_cells = Some(
                    cfg.sweep
                        .iter()
                        .filter(|c| (c.obs_set == "x" || c.obs_set == "y") && c.m >= 3)
                        .cloned()
                        .collect(),
                );
            }
        }
        FigureId::Fig3 | FigureId::Fig4 => {
            cfg.models.kinds = vec![ModelKind::Dts, ModelKind::Node, ModelKind::Recon];
            cfg.sweep.retain(|c| {
                (c.obs_set == "x" && c.m >= 3) || (c.obs_set == "y" && c.m >= 4)
            });
            cfg.evaluation.eval_cells = Some(vec![
                SweepCell { obs_set: "x".into(), m: 3, n_stride: 1 },
                SweepCell { obs_set: "y".into(), m: 4, n_stride: 1 },
            ]);
        }
        FigureId::Fig6 => {
            cfg.models.kinds = vec![ModelKind::Dts, ModelKind::Node, ModelKind::Recon];
            cfg.sweep.retain(|c| c.n_stride == 6);
            cfg.evaluation.eval_cells = Some(vec![SweepCell {
                obs_set: "dp2".into(),
                m: 8,
                n_stride: 6,
            }]);
        }
        FigureId::Fig7 | FigureId::Fig8 => {
            cfg.models.kinds = vec![ModelKind::Dts, ModelKind::Node, ModelKind::Recon];
            cfg.sweep.retain(|c| {
                matches!(
                    (c.obs_set.as_str(), c.m, c.n_stride),
                    ("dp1", 16, 6) | ("dp2", 8, 6) | ("dp4", 4, 16) | ("dp8", 2, 16)
                )
            });
            cfg.evaluation.eval_cells = Some(cfg.sweep.clone());
        }
        FigureId::Fig11 => {
            cfg.models.kinds = vec![ModelKind::Dts, ModelKind::Node, ModelKind::Recon];
        }
    }
    Ok(cfg)
}

pub fn cmd_reproduce(
    figure: FigureId,
    preset: Preset,
    out_dir: &Path,
    force: bool,
) -> anyhow::Result<()> {
    let cfg = figure_config(figure, preset)?;
    let ctx = Ctx::new(cfg, out_dir, force)?;

    cmd_simulate(&ctx)?;
    cmd_embed(&ctx)?;
    for kind in ctx.config.models.kinds.clone() {
        cmd_train(&ctx, kind, None)?;
    }
    cmd_evaluate(&ctx)?;

    // Figure CSV from the training/evaluation artifacts.
    let fig_dir = ctx.subdir("reproduce")?;
    match figure {
        FigureId::Fig2 | FigureId::Fig6 => loss_sweep_csv(&ctx, figure, &fig_dir)?,
        FigureId::Fig5 | FigureId::Fig11 => kl_csv(&ctx, figure, &fig_dir)?,
        FigureId::Fig3 | FigureId::Fig7 => copy_eval_curves(&ctx, figure, &fig_dir, "tracking")?,
        FigureId::Fig4 | FigureId::Fig8 => copy_eval_curves(&ctx, figure, &fig_dir, "autocorr")?,
    }
    println!("reproduce: bundle written under {}", fig_dir.display());
    Ok(())
}

/// (obs_set, m, train_mse, test_mse) averaged over seeds, per model kind.
fn loss_sweep_csv(ctx: &Ctx, figure: FigureId, fig_dir: &Path) -> anyhow::Result<()> {
    for kind in [ModelKind::Dts, ModelKind::Recon, ModelKind::Node] {
        if !ctx.config.models.kinds.contains(&kind) {
            continue;
        }
        let mut table = CsvTable::new(&["u_p", "m", "train_mse", "test_mse"]);
        for cell in &ctx.config.sweep {
            let mut train_acc = 0.0;
            let mut test_acc = 0.0;
            let mut count = 0.0;
            for &seed in &ctx.config.seeds {
                let stem = crate::commands::model_stem(&ctx.out_dir, kind, &cell.label(), seed);
                let hist = std::fs::read_to_string(stem.with_extension("history.csv"))?;
                if let Some(last) = hist.lines().filter(|l| !l.is_empty()).next_back() {
                    let fields: Vec<&str> = last.split(',').collect();
                    let tr: f64 = fields[1].parse()?;
                    let te: f64 = fields[2].parse()?;
                    // NODE histories evaluate the test loss only periodically.
                    if tr.is_finite() {
                        train_acc += tr;
                        test_acc += te;
                        count += 1.0;
                    }
                }
            }
            if count > 0.0 {
                table.push(vec![
                    cell.obs_set.clone(),
                    cell.m.to_string(),
                    fmt(train_acc / count),
                    fmt(test_acc / count),
                ]);
            }
        }
        let name = format!("{:?}_{kind}.csv", figure).to_lowercase();
        table.write(&fig_dir.join(name))?;
    }
    Ok(())
}

/// KL divergence rows from the evaluation summary.
fn kl_csv(ctx: &Ctx, figure: FigureId, fig_dir: &Path) -> anyhow::Result<()> {
    let summary = std::fs::read_to_string(ctx.out_dir.join("eval/summary.csv"))?;
    let mut table = CsvTable::new(&["kind", "cell", "seed", "kl", "kl_baseline", "kl_recon_only", "best"]);
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() >= 12 {
            table.push(vec![
                f[0].into(),
                f[1].into(),
                f[2].into(),
                f[4].into(),
                f[5].into(),
                f[6].into(),
                f[11].into(),
            ]);
        }
    }
    let name = format!("{:?}_kl.csv", figure).to_lowercase();
    table.write(&fig_dir.join(name))?;
    Ok(())
}

/// Collects per-model curve CSVs emitted by the evaluate stage.
fn copy_eval_curves(ctx: &Ctx, figure: FigureId, fig_dir: &Path, suffix: &str) -> anyhow::Result<()> {
    let eval_dir = ctx.out_dir.join("eval");
    for entry in std::fs::read_dir(&eval_dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(&format!("_{suffix}.csv")) {
            std::fs::copy(entry.path(), fig_dir.join(format!("{:?}_{name}", figure).to_lowercase()))?;
        }
    }
    Ok(())
}
