//! Adam optimizer with bias correction.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::nn::mlp::{Gradients, Mlp};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { beta1: 0.9, beta2: 0.999, eps: 1e-7 }
    }
}

/// First/second moment estimates mirroring the network's parameter shapes.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub step_count: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, hyper: AdamHyper) -> AdamState {
        AdamState {
            hyper,
            step_count: 0,
            m_w: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }
}

/// One Adam update: m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
/// p <- p - lr * m_hat / (sqrt(v_hat) + eps).
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.step_count += 1;
    let t = state.step_count as f64;
    let h = &state.hyper;
    let bc1 = 1.0 - h.beta1.powf(t);
    let bc2 = 1.0 - h.beta2.powf(t);

    for l in 0..net.weights.len() {
        update(
            net.weights[l].iter_mut(),
            grads.d_weights[l].iter(),
            state.m_w[l].iter_mut(),
            state.v_w[l].iter_mut(),
            h,
            lr,
            bc1,
            bc2,
        );
        update(
            net.biases[l].iter_mut(),
            grads.d_biases[l].iter(),
            state.m_b[l].iter_mut(),
            state.v_b[l].iter_mut(),
            h,
            lr,
            bc1,
            bc2,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn update<'a>(
    params: impl Iterator<Item = &'a mut f64>,
    grads: impl Iterator<Item = &'a f64>,
    m: impl Iterator<Item = &'a mut f64>,
    v: impl Iterator<Item = &'a mut f64>,
    h: &AdamHyper,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for (((p, g), mi), vi) in params.zip(grads).zip(m).zip(v) {
        *mi = h.beta1 * *mi + (1.0 - h.beta1) * g;
        *vi = h.beta2 * *vi + (1.0 - h.beta2) * g * g;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + h.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::Activation;

    fn scalar_net() -> Mlp {
        let mut net = Mlp::init(&[1, 1], &[Activation::Linear], 0).unwrap();
        net.weights[0][[0, 0]] = 1.0;
        net
    }

    fn unit_grads(net: &Mlp, value: f64) -> Gradients {
        let mut g = Gradients::zeros_like(net);
        g.d_weights[0][[0, 0]] = value;
        g
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With g = 1 the bias-corrected ratio is exactly 1, so the update is
        // -lr / (1 + eps) up to the eps term.
        let mut net = scalar_net();
        let mut state = AdamState::new(&net, AdamHyper::default());
        let g = unit_grads(&net, 1.0);
        adam_step(&mut net, &g, &mut state, 0.001);
        let delta = net.weights[0][[0, 0]] - 1.0;
        assert!((delta + 0.001).abs() < 1e-9, "delta {delta}");
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut net = scalar_net();
        let mut state = AdamState::new(&net, AdamHyper::default());
        let g = unit_grads(&net, 0.0);
        adam_step(&mut net, &g, &mut state, 0.1);
        assert_eq!(net.weights[0][[0, 0]], 1.0);
    }

    #[test]
    fn deterministic_updates() {
        let run = || {
            let mut net = scalar_net();
            let mut state = AdamState::new(&net, AdamHyper::default());
            for k in 0..10 {
                let g = unit_grads(&net, (k as f64 * 0.3).sin());
                adam_step(&mut net, &g, &mut state, 0.01);
            }
            net.weights[0][[0, 0]]
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
