//! Scratch probe: desk-scale Lorenz DTS training quality and cost.

use delaycast_core::dynsys::{simulate_lorenz, LorenzParams};
use delaycast_core::embedding::{project, EmbeddingSpec, ObservationSpec};
use delaycast_core::eval::{detect_collapse, ensemble_tracking_error};
use delaycast_core::models::{dts_rollout, dts_train, true_embeddings, DtsTrainOptions};
use delaycast_core::nn::TrainConfig;

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 200,
        batch_size: 256,
        lr0: 1e-3,
        lr_decay_factor: 0.5,
        lr_decay_every: 100,
        seed,
    }
}

fn main() {
    let truth = simulate_lorenz(&LorenzParams::default(), 100_000, 0.1, 10_000, 1).unwrap();
    let obs_all = ObservationSpec::new(vec![0]).unwrap();
    let x = project(&truth, &obs_all).unwrap();

    let mut mse = std::collections::BTreeMap::new();
    for m in [1usize, 2, 3] {
        let spec = EmbeddingSpec::new(m, 1, 0.1).unwrap();
        let t = std::time::Instant::now();
        let opts = DtsTrainOptions { hidden: vec![64, 64], train: cfg(1), normalize: true };
        let res = dts_train(&x, &spec, &ObservationSpec::new(vec![0]).unwrap(), &opts).unwrap();
        println!(
            "x m={m}: raw test mse {:.3e} (norm final {:.3e}) in {:?}",
            res.test_mse_raw,
            res.history.final_test_mse().unwrap(),
            t.elapsed()
        );
        mse.insert(m, res.test_mse_raw);

        if m == 1 {
            // Long rollout: collapse expected.
            let embeds = true_embeddings(&x, &spec).unwrap();
            let u_d0: Vec<f64> = embeds.row(embeds.nrows() - 1).to_vec();
            let r = dts_rollout(&res.model, &u_d0, 100_000).unwrap();
            println!(
                "  m=1 rollout: n={} diverged={:?}",
                r.series.n_samples(),
                r.diverged_at
            );
            if r.series.n_samples() > 4000 {
                println!("  collapse: {:?}", detect_collapse(&r.series, 100.0));
            }
        }
        if m == 3 {
            // Tracking error on the test split.
            let n = x.n_samples();
            let test = x.slice_samples((n as f64 * 0.8) as usize, n).unwrap();
            let t2 = std::time::Instant::now();
            let tr = ensemble_tracking_error(&res.model, &test, 500, 10.0).unwrap();
            // error at t = 1 (step 5 at tau = 0.2).
            println!(
                "  tracking at t=1: median {:.3} mean {:.3} (diverged {}) in {:?}",
                tr.median_error[10], tr.mean_error[10], tr.n_diverged, t2.elapsed()
            );
            // Long rollout for autocorrelation and collapse check.
            let embeds = true_embeddings(&x, &spec).unwrap();
            let u_d0: Vec<f64> = embeds.row(embeds.nrows() - 1).to_vec();
            let t3 = std::time::Instant::now();
            let r = dts_rollout(&res.model, &u_d0, 100_000).unwrap();
            println!(
                "  m=3 rollout 1e4 units: n={} diverged={:?} in {:?}",
                r.series.n_samples(),
                r.diverged_at,
                t3.elapsed()
            );
            if r.series.n_samples() > 4000 {
                println!("  collapse: {:?}", detect_collapse(&r.series, 100.0));
                let ac_model = delaycast_core::eval::autocorrelation(&r.series, 0, 50).unwrap();
                let ac_truth = delaycast_core::eval::autocorrelation(&x, 0, 50).unwrap();
                let dev = ac_model
                    .iter()
                    .zip(ac_truth.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                println!("  autocorr max dev (t<=5): {dev:.4}");
            }
        }
    }
    println!("ratio m3/m2 = {:.4}", mse[&3] / mse[&2]);
}
