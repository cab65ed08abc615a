//! Continuous-time flow of the delay embedding: du_d/dt = g(u_d) - a u_d
//! with a learned network g and a small linear damping a that keeps long
//! integrations from blowing up.
//!
//! Training discretizes the flow with fixed-step RK4 at the data sampling
//! interval and minimizes the multi-step loss over N steps; the gradient is
//! the exact reverse-mode derivative of that discretization
//! (discretize-then-optimize). Inference integrates the same field with the
//! adaptive Dormand–Prince driver so trajectories can be sampled on any grid.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynsys::ode::{Dopri5Driver, IntegratorConfig};
use crate::embedding::{
    apply_vec, build_embedding, fit_embedding_norm, invert_vec, split_chronological, EmbeddingSpec,
    Normalization, ObservationSpec, TargetMode,
};
use crate::error::{Error, Result};
use crate::models::{Forecaster, Rollout, DIVERGENCE_SENTINEL};
use crate::nn::{adam_step, AdamHyper, AdamState, EpochStats, Gradients, Mlp, TrainConfig, TrainHistory};
use crate::timeseries::TimeSeries;

/// Offset for the batch-sampling RNG stream.
const BATCH_STREAM: u64 = 0x4e4f_4445; // "NODE"

#[derive(Debug, Clone)]
pub struct NodeModel {
    /// m * d_p -> m * d_p, acts on normalized coordinates.
    pub net: Mlp,
    /// Damping coefficient a (applied in normalized coordinates).
    pub damping_a: f64,
    pub spec: EmbeddingSpec,
    pub obs: ObservationSpec,
    /// Data sampling interval the flow was discretized with during training.
    pub train_dt: f64,
    /// Steps forecasted per training sample.
    pub n_multistep: usize,
    pub norm: Normalization,
}

#[derive(Debug, Clone)]
pub struct NodeTrainOptions {
    pub hidden: Vec<usize>,
    /// Multi-step horizon N.
    pub n_multistep: usize,
    pub damping_a: f64,
    /// `train.epochs` counts optimizer iterations; each iteration draws one
    /// random minibatch of initial embeddings from the training split.
    pub train: TrainConfig,
    pub normalize: bool,
    /// Evaluate the held-out multi-step loss every this many iterations.
    pub eval_every: usize,
}

#[derive(Debug)]
pub struct NodeTrainResult {
    pub model: NodeModel,
    pub history: TrainHistory,
    /// Batches skipped because the forward integration left the finite range.
    pub skipped_batches: usize,
}

/// Vector field f(u) = net(u) - a u on a batch of normalized states.
fn field_batch(net: &Mlp, a: f64, u: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut f = net.forward_batch(u)?;
    f.scaled_add(-a, u);
    Ok(f)
}

/// Stage inputs of one RK4 step, kept for the reverse sweep.
struct StepTrace {
    x1: Array2<f64>,
    x2: Array2<f64>,
    x3: Array2<f64>,
    x4: Array2<f64>,
}

/// One RK4 step of size h on a batch; returns the next state and the trace.
fn rk4_forward(net: &Mlp, a: f64, u: &Array2<f64>, h: f64) -> Result<(Array2<f64>, StepTrace)> {
    let x1 = u.clone();
    let k1 = field_batch(net, a, &x1.view())?;
    let mut x2 = u.clone();
    x2.scaled_add(0.5 * h, &k1);
    let k2 = field_batch(net, a, &x2.view())?;
    let mut x3 = u.clone();
    x3.scaled_add(0.5 * h, &k2);
    let k3 = field_batch(net, a, &x3.view())?;
    let mut x4 = u.clone();
    x4.scaled_add(h, &k3);
    let k4 = field_batch(net, a, &x4.view())?;

    let mut next = u.clone();
    next.scaled_add(h / 6.0, &k1);
    next.scaled_add(h / 3.0, &k2);
    next.scaled_add(h / 3.0, &k3);
    next.scaled_add(h / 6.0, &k4);
    Ok((next, StepTrace { x1, x2, x3, x4 }))
}

/// Reverse sweep of one RK4 step: given dL/d(next state), accumulates the
/// parameter gradients of the four field evaluations and returns dL/d(state).
fn rk4_backward(
    net: &Mlp,
    a: f64,
    trace: &StepTrace,
    h: f64,
    g_next: &Array2<f64>,
    acc: &mut Gradients,
) -> Result<Array2<f64>> {
    // dL/dk_i pulled back through f at x_i: J_f^T v = J_net^T v - a v.
    let pull = |x: &Array2<f64>, gk: &Array2<f64>, acc: &mut Gradients| -> Result<Array2<f64>> {
        let grads = net.backward_batch(&x.view(), &gk.view())?;
        acc.accumulate(&grads);
        let mut dx = grads.d_input;
        dx.scaled_add(-a, gk);
        Ok(dx)
    };

    let gk4 = g_next.mapv(|v| v * h / 6.0);
    let dx4 = pull(&trace.x4, &gk4, acc)?;

    let mut gk3 = g_next.mapv(|v| v * h / 3.0);
    gk3.scaled_add(h, &dx4);
    let dx3 = pull(&trace.x3, &gk3, acc)?;

    let mut gk2 = g_next.mapv(|v| v * h / 3.0);
    gk2.scaled_add(0.5 * h, &dx3);
    let dx2 = pull(&trace.x2, &gk2, acc)?;

    let mut gk1 = g_next.mapv(|v| v * h / 6.0);
    gk1.scaled_add(0.5 * h, &dx2);
    let dx1 = pull(&trace.x1, &gk1, acc)?;

    let mut g_state = g_next.clone();
    g_state += &dx1;
    g_state += &dx2;
    g_state += &dx3;
    g_state += &dx4;
    Ok(g_state)
}

/// Multi-step loss and exact gradient for one batch.
/// Targets hold N successive embeddings concatenated per row.
/// Returns None when the forward pass left the finite range (caller skips).
pub fn node_loss_and_grads(
    net: &Mlp,
    a: f64,
    h: f64,
    n_steps: usize,
    u0: &Array2<f64>,
    targets: &ArrayView2<'_, f64>,
) -> Result<Option<(f64, Gradients)>> {
    let width = u0.ncols();
    let batch = u0.nrows();
    if targets.ncols() != n_steps * width || targets.nrows() != batch {
        return Err(Error::ShapeMismatch(format!(
            "targets are {}x{}, expected {}x{}",
            targets.nrows(),
            targets.ncols(),
            batch,
            n_steps * width
        )));
    }

    // Forward: keep every state and stage trace.
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut traces = Vec::with_capacity(n_steps);
    states.push(u0.clone());
    for s in 0..n_steps {
        let (next, trace) = rk4_forward(net, a, &states[s], h)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        states.push(next);
        traces.push(trace);
    }

    // Loss: sum over steps of the per-step mean squared error.
    let denom = (batch * width) as f64;
    let mut loss = 0.0;
    for s in 1..=n_steps {
        let t = targets.slice(ndarray::s![.., (s - 1) * width..s * width]);
        loss += states[s]
            .iter()
            .zip(t.iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            / denom;
    }
    if !loss.is_finite() {
        return Ok(None);
    }

    // Reverse sweep with loss injections at every step.
    let mut acc = Gradients::zeros_like(net);
    let mut g = Array2::zeros((batch, width));
    for s in (1..=n_steps).rev() {
        let t = targets.slice(ndarray::s![.., (s - 1) * width..s * width]);
        let mut inject = states[s].clone();
        inject -= &t;
        inject.mapv_inplace(|v| 2.0 * v / denom);
        g += &inject;
        g = rk4_backward(net, a, &traces[s - 1], h, &g, &mut acc)?;
    }
    Ok(Some((loss, acc)))
}

/// Trains the flow on a partial series sampled at the data interval dt.
pub fn node_train(
    data: &TimeSeries,
    spec: &EmbeddingSpec,
    obs: &ObservationSpec,
    opts: &NodeTrainOptions,
) -> Result<NodeTrainResult> {
    opts.train.validate()?;
    if opts.n_multistep < 1 {
        return Err(Error::invalid("n_multistep must be >= 1".to_string()));
    }
    if !(opts.damping_a >= 0.0) {
        return Err(Error::invalid(format!("damping must be >= 0, got {}", opts.damping_a)));
    }
    let mut ds = build_embedding(data, spec, TargetMode::EmbeddedSequence { n_steps: opts.n_multistep })?;
    let d_p = ds.d_p;
    let width = spec.m * d_p;

    // Inputs and targets live in the same physical space; they must share one
    // normalization so the discretized flow is consistent.
    let (train_end, n_pairs) = split_chronological(ds.n_pairs());
    let norm = if opts.normalize {
        fit_embedding_norm(&ds.inputs, d_p, train_end)?
    } else {
        Normalization::identity(d_p)
    };
    crate::embedding::apply_blockwise(&mut ds.inputs, &norm);
    crate::embedding::apply_blockwise(&mut ds.targets, &norm);

    let mut net = Mlp::relu_net(width, &opts.hidden, width, opts.train.seed)?;
    let mut state = AdamState::new(&net, AdamHyper::default());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.train.seed ^ BATCH_STREAM);
    let h = data.dt;

    let mut history = TrainHistory::default();
    let mut skipped = 0usize;
    let eval_every = opts.eval_every.max(1);
    for iter in 0..opts.train.epochs {
        let lr = opts.train.lr_at_epoch(iter);
        let idx: Vec<usize> = (0..opts.train.batch_size)
            .map(|_| rng.random_range(0..train_end))
            .collect();
        let x = crate::nn::train::gather_rows(&ds.inputs.view(), &idx);
        let t = crate::nn::train::gather_rows(&ds.targets.view(), &idx);
        match node_loss_and_grads(&net, opts.damping_a, h, opts.n_multistep, &x, &t.view())? {
            Some((loss, grads)) => {
                if !loss.is_finite() {
                    return Err(Error::NanLoss { epoch: iter, batch: 0 });
                }
                adam_step(&mut net, &grads, &mut state, lr);
                let test_mse = if (iter + 1) % eval_every == 0 || iter + 1 == opts.train.epochs {
                    node_test_loss(&net, opts, h, &ds.inputs, &ds.targets, train_end, n_pairs)?
                } else {
                    f64::NAN
                };
                history.epochs.push(EpochStats { epoch: iter, train_mse: loss, test_mse, lr });
            }
            None => {
                skipped += 1;
                log::warn!("node_train: skipped diverging batch at iteration {iter}");
            }
        }
    }
    if opts.train.epochs > 0 && skipped * 100 > opts.train.epochs {
        return Err(Error::IntegrationFailure {
            t_last: f64::NAN,
            reason: format!("{skipped} of {} training batches diverged", opts.train.epochs),
        });
    }

    let model = NodeModel {
        net,
        damping_a: opts.damping_a,
        spec: *spec,
        obs: obs.clone(),
        train_dt: h,
        n_multistep: opts.n_multistep,
        norm,
    };
    Ok(NodeTrainResult { model, history, skipped_batches: skipped })
}

/// Multi-step loss on (a deterministic subsample of) the held-out split.
fn node_test_loss(
    net: &Mlp,
    opts: &NodeTrainOptions,
    h: f64,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    train_end: usize,
    n_pairs: usize,
) -> Result<f64> {
    let n_test = n_pairs - train_end;
    if n_test == 0 {
        return Ok(f64::NAN);
    }
    let take = n_test.min(2000);
    let idx: Vec<usize> = (0..take).map(|k| train_end + k * n_test / take).collect();
    let x = crate::nn::train::gather_rows(&inputs.view(), &idx);
    let t = crate::nn::train::gather_rows(&targets.view(), &idx);
    let width = x.ncols();
    let mut u = x;
    let mut loss = 0.0;
    let denom = (u.nrows() * width) as f64;
    for s in 1..=opts.n_multistep {
        let (next, _) = rk4_forward(net, opts.damping_a, &u, h)?;
        u = next;
        let tgt = t.slice(ndarray::s![.., (s - 1) * width..s * width]);
        loss += u
            .iter()
            .zip(tgt.iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            / denom;
    }
    Ok(loss)
}

/// Integrates the learned flow from a raw embedding, sampling every
/// `sample_dt` up to `t_end`. Integrator failure or the divergence sentinel
/// truncate the rollout and set the flag rather than erroring.
pub fn node_integrate(
    model: &NodeModel,
    u_d0: &[f64],
    t_end: f64,
    sample_dt: f64,
    config: &IntegratorConfig,
) -> Result<Rollout> {
    let width = model.spec.m * model.obs.dim();
    if u_d0.len() != width {
        return Err(Error::ShapeMismatch(format!(
            "initial embedding has {} entries, model expects {width}",
            u_d0.len()
        )));
    }
    if !(t_end > 0.0) || !(sample_dt > 0.0) {
        return Err(Error::invalid("t_end and sample_dt must be positive".to_string()));
    }
    let n_steps = (t_end / sample_dt + 1e-9).floor() as usize;

    let net = &model.net;
    let a = model.damping_a;
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        match net.forward(y) {
            Ok(f) => {
                for i in 0..dy.len() {
                    dy[i] = f[i] - a * y[i];
                }
            }
            Err(_) => dy.fill(f64::NAN),
        }
    };

    let mut u = u_d0.to_vec();
    apply_vec(&mut u, &model.norm);

    let mut emb_rows: Vec<f64> = Vec::with_capacity((n_steps + 1) * width);
    let push_raw = |u: &[f64], rows: &mut Vec<f64>| {
        let mut raw = u.to_vec();
        invert_vec(&mut raw, &model.norm);
        rows.extend_from_slice(&raw);
    };
    push_raw(&u, &mut emb_rows);

    let mut driver = Dopri5Driver::new(*config, sample_dt / 10.0);
    let mut diverged_at = None;
    for step in 1..=n_steps {
        let t_from = (step - 1) as f64 * sample_dt;
        let t_to = step as f64 * sample_dt;
        if driver.advance(&rhs, &mut u, t_from, t_to).is_err() {
            diverged_at = Some(step);
            break;
        }
        if u.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_SENTINEL) {
            diverged_at = Some(step);
            break;
        }
        push_raw(&u, &mut emb_rows);
    }

    let n_rows = emb_rows.len() / width;
    let embeddings = Array2::from_shape_vec((n_rows, width), emb_rows)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let partial = embeddings.slice(ndarray::s![.., ..model.obs.dim()]).to_owned();
    let series = TimeSeries::new(partial, sample_dt, 0.0)?;
    Ok(Rollout { series, embeddings, diverged_at })
}

/// One-delay-step MSE of the leading embedding block in raw units, for
/// comparison against the discrete-time model's test loss. Uses the same
/// fixed-step RK4 discretization as training.
pub fn node_loss_prime(model: &NodeModel, test: &TimeSeries) -> Result<f64> {
    model.spec.check_dt(test.dt)?;
    let ds = build_embedding(
        test,
        &model.spec,
        TargetMode::NextPartial { horizon_stride: model.spec.n_stride },
    )?;
    let d_p = model.obs.dim();
    let mut u = ds.inputs.clone();
    crate::embedding::apply_blockwise(&mut u, &model.norm);
    for _ in 0..model.spec.n_stride {
        let (next, _) = rk4_forward(&model.net, model.damping_a, &u, model.train_dt)?;
        u = next;
    }
    // Leading block back to raw units, against raw targets.
    let mut pred = u.slice(ndarray::s![.., ..d_p]).to_owned();
    crate::embedding::invert_blockwise(&mut pred, &model.norm);
    Ok(crate::nn::mse(&pred.view(), &ds.targets.view()))
}

impl Forecaster for NodeModel {
    fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    fn obs_dim(&self) -> usize {
        self.obs.dim()
    }

    fn forecast(&self, u_d0: &[f64], n_steps: usize, step_dt: f64) -> Result<Rollout> {
        node_integrate(
            self,
            u_d0,
            n_steps as f64 * step_dt,
            step_dt,
            &IntegratorConfig::default(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeroed_model(width: usize, a: f64) -> NodeModel {
        let mut net = Mlp::relu_net(width, &[8], width, 0).unwrap();
        net.zero_params();
        NodeModel {
            net,
            damping_a: a,
            spec: EmbeddingSpec { m: width, n_stride: 1, tau: 0.1 },
            obs: ObservationSpec::new(vec![0]).unwrap(),
            train_dt: 0.1,
            n_multistep: 2,
            norm: Normalization::identity(1),
        }
    }

    #[test]
    fn pure_damping_decays_exponentially() {
        let a = 1e-3;
        let model = zeroed_model(3, a);
        let r = node_integrate(&model, &[2.0, -1.0, 0.5], 10.0, 1.0, &IntegratorConfig::default())
            .unwrap();
        assert!(!r.diverged());
        for step in 0..=10 {
            let expect = 2.0 * (-a * step as f64).exp();
            let got = r.embeddings[[step, 0]];
            assert!((got - expect).abs() < 1e-9, "step {step}: {got} vs {expect}");
        }
    }

    #[test]
    fn zero_damping_zero_net_is_constant() {
        let model = zeroed_model(2, 0.0);
        let r = node_integrate(&model, &[1.5, -2.5], 5.0, 0.5, &IntegratorConfig::default()).unwrap();
        for row in r.embeddings.rows() {
            assert!((row[0] - 1.5).abs() < 1e-12);
            assert!((row[1] + 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn damping_decay_is_monotone() {
        let model = zeroed_model(4, 0.05);
        let r = node_integrate(&model, &[1.0, 1.0, 1.0, 1.0], 20.0, 1.0, &IntegratorConfig::default())
            .unwrap();
        let norms: Vec<f64> = r
            .embeddings
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] < w[0], "norm failed to decay: {w:?}");
        }
    }

    #[test]
    fn multistep_gradient_matches_finite_differences() {
        let width = 4;
        let mut net = Mlp::relu_net(width, &[8], width, 3).unwrap();
        let a = 1e-3;
        let h = 0.1;
        let n_steps = 2;
        let u0 = Array2::from_shape_fn((3, width), |(i, j)| ((i * width + j) as f64 * 0.41).sin());
        let targets =
            Array2::from_shape_fn((3, n_steps * width), |(i, j)| ((i * 7 + j) as f64 * 0.23).cos());

        let (_, grads) = node_loss_and_grads(&net, a, h, n_steps, &u0, &targets.view())
            .unwrap()
            .unwrap();
        let flat = grads.flatten();

        let base = net.flatten_params();
        let eps = 1e-5;
        for (pi, g) in flat.iter().enumerate().step_by(11) {
            let mut plus = base.clone();
            plus[pi] += eps;
            net.set_params_from_flat(&plus).unwrap();
            let (lp, _) = node_loss_and_grads(&net, a, h, n_steps, &u0, &targets.view())
                .unwrap()
                .unwrap();
            let mut minus = base.clone();
            minus[pi] -= eps;
            net.set_params_from_flat(&minus).unwrap();
            let (lm, _) = node_loss_and_grads(&net, a, h, n_steps, &u0, &targets.view())
                .unwrap()
                .unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let denom = fd.abs().max(g.abs()).max(1e-8);
            assert!((fd - g).abs() / denom < 1e-4, "param {pi}: analytic {g} vs fd {fd}");
        }
        net.set_params_from_flat(&base).unwrap();
    }

    #[test]
    fn n_equals_one_matches_single_step_loss() {
        let width = 3;
        let net = Mlp::relu_net(width, &[8], width, 5).unwrap();
        let u0 = Array2::from_shape_fn((4, width), |(i, j)| ((i + j) as f64 * 0.3).sin());
        let target = Array2::from_shape_fn((4, width), |(i, j)| ((i + 2 * j) as f64 * 0.7).cos());
        let (loss_multi, _) = node_loss_and_grads(&net, 0.01, 0.1, 1, &u0, &target.view())
            .unwrap()
            .unwrap();
        // Direct single-step computation.
        let (next, _) = rk4_forward(&net, 0.01, &u0, 0.1).unwrap();
        let direct = crate::nn::mse(&next.view(), &target.view());
        assert!((loss_multi - direct).abs() < 1e-15);
    }

    #[test]
    fn loss_prime_of_frozen_flow_is_persistence() {
        // Zero net, zero damping: the flow holds the embedding constant, so
        // the one-delay-step error equals the persistence baseline.
        use ndarray::Array2 as A2;
        let data: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let ts = crate::timeseries::TimeSeries::new(
            A2::from_shape_vec((200, 1), data).unwrap(),
            0.1,
            0.0,
        )
        .unwrap();
        let mut model = zeroed_model(3, 0.0);
        model.spec = EmbeddingSpec::new(3, 1, 0.1).unwrap();
        let lp = node_loss_prime(&model, &ts).unwrap();

        // Persistence: u(t + dt) predicted as u(t), on the embeddable range.
        let ds = build_embedding(&ts, &model.spec, TargetMode::NextPartial { horizon_stride: 1 })
            .unwrap();
        let persist: f64 = ds
            .inputs
            .column(0)
            .iter()
            .zip(ds.targets.column(0).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / ds.n_pairs() as f64;
        assert!((lp - persist).abs() < 1e-12, "{lp} vs {persist}");
    }
}
