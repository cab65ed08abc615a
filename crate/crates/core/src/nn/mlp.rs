//! Dense feed-forward networks with explicit reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(&self, z: &mut Array2<f64>) {
        if let Activation::Relu = self {
            z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
        }
    }

    /// Derivative evaluated on the pre-activation; relu'(0) is defined as 0.
    fn derivative(&self, pre: &Array2<f64>) -> Option<Array2<f64>> {
        match self {
            Activation::Linear => None,
            Activation::Relu => Some(pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 })),
        }
    }
}

/// Weights are stored [fan_in x fan_out] so a batch X of shape
/// [batch x fan_in] advances as X.dot(W) + b.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Per-layer parameter gradients plus the gradient w.r.t. the batch inputs.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
    pub d_input: Array2<f64>,
}

impl Mlp {
    /// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero
    /// biases, deterministic per seed.
    pub fn init(layer_sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Mlp> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("need at least input and output layer sizes".to_string()));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} activations for {} layers",
                activations.len(),
                layer_sizes.len() - 1
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("layer sizes must be positive".to_string()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_sizes.len() - 1 {
            let fan_in = layer_sizes[l];
            let fan_out = layer_sizes[l + 1];
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp { layer_sizes: layer_sizes.to_vec(), activations: activations.to_vec(), weights, biases })
    }

    /// Standard architecture helper: hidden layers are ReLU, output linear.
    pub fn relu_net(input: usize, hidden: &[usize], output: usize, seed: u64) -> Result<Mlp> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Linear);
        Mlp::init(&sizes, &acts, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Batched forward pass: [batch x in] -> [batch x out].
    pub fn forward_batch(&self, x: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut a = x.to_owned();
        for l in 0..self.n_layers() {
            let mut z = a.dot(&self.weights[l]);
            z += &self.biases[l];
            self.activations[l].apply(&mut z);
            a = z;
        }
        Ok(a)
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(self.forward_batch(&view)?.row(0).to_vec())
    }

    /// Forward pass that keeps the per-layer activations for backprop.
    /// Returns (per-layer post-activations incl. input, per-layer pre-activations).
    fn forward_trace(&self, x: &ArrayView2<'_, f64>) -> Result<(Vec<Array2<f64>>, Vec<Array2<f64>>)> {
        self.check_input(x)?;
        let mut post = Vec::with_capacity(self.n_layers() + 1);
        let mut pre = Vec::with_capacity(self.n_layers());
        post.push(x.to_owned());
        for l in 0..self.n_layers() {
            let mut z = post[l].dot(&self.weights[l]);
            z += &self.biases[l];
            pre.push(z.clone());
            self.activations[l].apply(&mut z);
            post.push(z);
        }
        Ok((post, pre))
    }

    /// Reverse-mode gradients of the forward map: given dL/d(output) for a
    /// batch, produces exact dL/d(weights), dL/d(biases), dL/d(input).
    pub fn backward_batch(
        &self,
        x: &ArrayView2<'_, f64>,
        grad_out: &ArrayView2<'_, f64>,
    ) -> Result<Gradients> {
        if grad_out.ncols() != self.output_dim() || grad_out.nrows() != x.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "grad_out is {}x{}, expected {}x{}",
                grad_out.nrows(),
                grad_out.ncols(),
                x.nrows(),
                self.output_dim()
            )));
        }
        let (post, pre) = self.forward_trace(x)?;
        let n_layers = self.n_layers();
        let mut d_weights = vec![Array2::zeros((0, 0)); n_layers];
        let mut d_biases = vec![Array1::zeros(0); n_layers];

        let mut delta = grad_out.to_owned();
        for l in (0..n_layers).rev() {
            if let Some(mask) = self.activations[l].derivative(&pre[l]) {
                delta *= &mask;
            }
            d_weights[l] = post[l].t().dot(&delta);
            d_biases[l] = delta.sum_axis(Axis(0));
            delta = delta.dot(&self.weights[l].t());
        }
        Ok(Gradients { d_weights, d_biases, d_input: delta })
    }

    /// Flattens all parameters (layer by layer, weights then bias) into one
    /// vector. Used by finite-difference checks.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in 0..self.n_layers() {
            out.extend(self.weights[l].iter());
            out.extend(self.biases[l].iter());
        }
        out
    }

    pub fn set_params_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_parameters() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_parameters()
            )));
        }
        let mut pos = 0;
        for l in 0..self.n_layers() {
            for w in self.weights[l].iter_mut() {
                *w = flat[pos];
                pos += 1;
            }
            for b in self.biases[l].iter_mut() {
                *b = flat[pos];
                pos += 1;
            }
        }
        Ok(())
    }

    /// Zeroes every weight and bias (handy for damping-only flow fields).
    pub fn zero_params(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.d_weights.len() {
            out.extend(self.d_weights[l].iter());
            out.extend(self.d_biases[l].iter());
        }
        out
    }

    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            d_weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            d_biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            d_input: Array2::zeros((0, 0)),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for l in 0..self.d_weights.len() {
            self.d_weights[l] += &other.d_weights[l];
            self.d_biases[l] += &other.d_biases[l];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_net_maps_to_zero() {
        let mut net = Mlp::relu_net(3, &[8, 8], 2, 0).unwrap();
        net.zero_params();
        let y = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let mut net = Mlp::init(&[2, 2], &[Activation::Linear], 0).unwrap();
        net.weights[0] = array![[1.0, 0.0], [0.0, 1.0]];
        net.biases[0].fill(0.0);
        let y = net.forward(&[0.25, -4.0]).unwrap();
        assert_eq!(y, vec![0.25, -4.0]);
    }

    #[test]
    fn hand_evaluated_relu_net() {
        // 1-2-1: hidden weights [1, -1], biases [0, 1], relu; output weights [1, 1].
        // Input 2: relu(2) + relu(-2 + 1) = 2.
        let mut net = Mlp::init(&[1, 2, 1], &[Activation::Relu, Activation::Linear], 0).unwrap();
        net.weights[0] = array![[1.0, -1.0]];
        net.biases[0] = array![0.0, 1.0];
        net.weights[1] = array![[1.0], [1.0]];
        net.biases[1] = array![0.0];
        let y = net.forward(&[2.0]).unwrap();
        assert_eq!(y, vec![2.0]);
    }

    #[test]
    fn same_seed_identical_weights() {
        let a = Mlp::relu_net(3, &[16, 16], 1, 9).unwrap();
        let b = Mlp::relu_net(3, &[16, 16], 1, 9).unwrap();
        assert_eq!(a, b);
        let c = Mlp::relu_net(3, &[16, 16], 1, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn glorot_bound_respected() {
        let net = Mlp::init(&[2, 2], &[Activation::Linear], 0).unwrap();
        let bound = (6.0f64 / 4.0).sqrt();
        for w in net.weights[0].iter() {
            assert!(w.abs() <= bound);
        }
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        // Single linear layer, dL/dy = 1: dW = x^T 1, db = 1.
        let mut net = Mlp::init(&[3, 1], &[Activation::Linear], 0).unwrap();
        net.zero_params();
        let x = array![[2.0, -1.0, 0.5]];
        let g = array![[1.0]];
        let grads = net.backward_batch(&x.view(), &g.view()).unwrap();
        assert_eq!(grads.d_weights[0], array![[2.0], [-1.0], [0.5]]);
        assert_eq!(grads.d_biases[0], array![1.0]);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let net = Mlp::relu_net(4, &[8], 2, 3).unwrap();
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i + j) as f64 * 0.1 - 0.5);
        let g = Array2::zeros((5, 2));
        let grads = net.backward_batch(&x.view(), &g.view()).unwrap();
        for dw in &grads.d_weights {
            assert!(dw.iter().all(|v| *v == 0.0));
        }
        assert!(grads.d_input.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut net = Mlp::relu_net(3, &[10, 10], 2, 7).unwrap();
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let t = Array2::from_shape_fn((4, 2), |(i, j)| ((i * 2 + j) as f64 * 0.53).cos());

        // Loss: mean squared error over batch and outputs.
        let loss = |net: &Mlp| -> f64 {
            let y = net.forward_batch(&x.view()).unwrap();
            let d = &y - &t;
            d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64
        };
        let y = net.forward_batch(&x.view()).unwrap();
        let norm = (y.len()) as f64;
        let grad_out = (&y - &t).mapv(|v| 2.0 * v / norm);
        let analytic = net.backward_batch(&x.view(), &grad_out.view()).unwrap().flatten();

        let base = net.flatten_params();
        let eps = 1e-5;
        for (pi, g) in analytic.iter().enumerate().step_by(7) {
            let mut plus = base.clone();
            plus[pi] += eps;
            net.set_params_from_flat(&plus).unwrap();
            let lp = loss(&net);
            let mut minus = base.clone();
            minus[pi] -= eps;
            net.set_params_from_flat(&minus).unwrap();
            let lm = loss(&net);
            let fd = (lp - lm) / (2.0 * eps);
            let denom = fd.abs().max(g.abs()).max(1e-8);
            assert!(
                (fd - g).abs() / denom < 1e-5,
                "param {pi}: analytic {g} vs fd {fd}"
            );
        }
        net.set_params_from_flat(&base).unwrap();
    }

    #[test]
    fn relu_positive_homogeneity_without_biases() {
        // Scaling inputs of a bias-free relu net by a power of two scales the
        // outputs exactly.
        let mut net = Mlp::relu_net(3, &[12, 12], 2, 5).unwrap();
        for b in &mut net.biases {
            b.fill(0.0);
        }
        let x = vec![0.3, -0.8, 1.1];
        let scaled: Vec<f64> = x.iter().map(|v| v * 4.0).collect();
        let y = net.forward(&x).unwrap();
        let ys = net.forward(&scaled).unwrap();
        for (a, b) in y.iter().zip(ys.iter()) {
            assert_eq!(*b, a * 4.0);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = Mlp::relu_net(3, &[4], 1, 0).unwrap();
        assert!(net.forward(&[1.0, 2.0]).is_err());
        let x = Array2::zeros((2, 3));
        let bad_g = Array2::zeros((3, 1));
        assert!(net.backward_batch(&x.view(), &bad_g.view()).is_err());
    }
}
