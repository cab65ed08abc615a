//! Scratch probe: 5-seed Lorenz DTS ensemble, long-rollout collapse, and
//! reconstructed joint-PDF KL against the data-vs-data baseline.

use delaycast_core::dynsys::{simulate_lorenz, LorenzParams};
use delaycast_core::embedding::{project, EmbeddingSpec, ObservationSpec};
use delaycast_core::eval::{
    autocorrelation, detect_collapse, kl_divergence, model_histogram, truth_histogram,
    PdfVariables,
};
use delaycast_core::models::{
    dts_rollout, dts_train, recon_apply, recon_train, true_embeddings, DtsTrainOptions,
    ReconTrainOptions,
};
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
    let baseline = simulate_lorenz(&LorenzParams::default(), 100_000, 0.1, 10_000, 77).unwrap();
    let obs = ObservationSpec::new(vec![0]).unwrap();
    let x = project(&truth, &obs).unwrap();
    let spec = EmbeddingSpec::new(3, 1, 0.1).unwrap();
    let vars = PdfVariables::Channels { a: 0, b: 1 };

    let t_hist = truth_histogram(&truth.values.view(), &vars, 100).unwrap();
    let b_hist = model_histogram(&baseline.values.view(), &vars, &t_hist).unwrap();
    let kl_baseline = kl_divergence(&b_hist, &t_hist).unwrap();
    println!("baseline KL = {kl_baseline:.5}");

    let t = std::time::Instant::now();
    let recon = recon_train(
        &x,
        &truth,
        &spec,
        &obs,
        &ReconTrainOptions { hidden: vec![64, 64], train: cfg(1), normalize: true },
    )
    .unwrap();
    println!("recon x m=3: raw test mse {:.3e} in {:?}", recon.test_mse_raw, t.elapsed());

    // Also z-observable reconstruction failure check at m = 3 (cheapest m).
    let z = project(&truth, &ObservationSpec::new(vec![2]).unwrap()).unwrap();
    for m in [1usize, 3, 6] {
        let zspec = EmbeddingSpec::new(m, 1, 0.1).unwrap();
        let zr = recon_train(
            &z,
            &truth,
            &zspec,
            &ObservationSpec::new(vec![2]).unwrap(),
            &ReconTrainOptions { hidden: vec![64, 64], train: cfg(1), normalize: true },
        )
        .unwrap();
        println!("recon z m={m}: raw test mse {:.3e} (ratio vs x: {:.1})", zr.test_mse_raw, zr.test_mse_raw / recon.test_mse_raw);
    }

    let embeds = true_embeddings(&x, &spec).unwrap();
    let u_d0: Vec<f64> = embeds.row(embeds.nrows() - 1).to_vec();
    let ac_truth = autocorrelation(&x, 0, 50).unwrap();

    for seed in 1..=5u64 {
        let t = std::time::Instant::now();
        let res = dts_train(
            &x,
            &spec,
            &obs,
            &DtsTrainOptions { hidden: vec![64, 64], train: cfg(seed), normalize: true },
        )
        .unwrap();
        let r = dts_rollout(&res.model, &u_d0, 100_000).unwrap();
        let collapse = if r.series.n_samples() > 4000 {
            format!("{:?}", detect_collapse(&r.series, 100.0).unwrap())
        } else {
            "diverged-early".to_string()
        };
        let recon_states = recon_apply(&recon.model, &r.embeddings.view()).unwrap();
        let m_hist = model_histogram(&recon_states.view(), &vars, &t_hist).unwrap();
        let kl = kl_divergence(&m_hist, &t_hist).unwrap();
        let ac_model = autocorrelation(&r.series, 0, 50).unwrap_or_default();
        let dev = ac_model
            .iter()
            .zip(ac_truth.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        println!(
            "seed {seed}: mse {:.2e} rollout_n {} diverged {:?} collapse {collapse} KL {kl:.4} (x baseline {:.1}) ac_dev {dev:.3} [{:?}]",
            res.test_mse_raw,
            r.series.n_samples(),
            r.diverged_at,
            kl / kl_baseline,
            t.elapsed()
        );
    }
}
