//! A small fully-connected policy network with hand-written reverse-mode
//! gradients: tanh hidden layers, identity output, mean-squared-error loss
//! averaged over batch and output dimensions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("input has {got} entries, network expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("non-finite loss encountered")]
    NonFiniteLoss,
}

/// Dense network: `layer_sizes = [input, hidden..., output]`. Weight matrix
/// for layer `l` is row-major `[out][in]`, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl PolicyNet {
    /// Uniform Xavier initialization from the given stream.
    pub fn init(layer_sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(layer_sizes.len() >= 2);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_sizes.len() - 1 {
            let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            weights.push((0..n_in * n_out).map(|_| rng.gen_range(-limit..=limit)).collect());
            biases.push(vec![0.0; n_out]);
        }
        PolicyNet { layer_sizes: layer_sizes.to_vec(), weights, biases }
    }

    pub fn zeros(layer_sizes: &[usize]) -> Self {
        let mut net = Self::init(layer_sizes, &mut crate::rngstream::stream(0, 0));
        for w in &mut net.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        net
    }

    pub fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn affine(&self, layer: usize, input: &[f64], out: &mut [f64]) {
        let n_in = self.layer_sizes[layer];
        let w = &self.weights[layer];
        for (j, o) in out.iter_mut().enumerate() {
            let row = &w[j * n_in..(j + 1) * n_in];
            let mut acc = self.biases[layer][j];
            for (wi, xi) in row.iter().zip(input) {
                acc += wi * xi;
            }
            *o = acc;
        }
    }

    /// Forward pass. Hidden layers apply tanh; the output layer is linear.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        if input.len() != self.input_len() {
            return Err(NetError::InputLength { expected: self.input_len(), got: input.len() });
        }
        let mut act = input.to_vec();
        for l in 0..self.n_layers() {
            let mut out = vec![0.0; self.layer_sizes[l + 1]];
            self.affine(l, &act, &mut out);
            if l + 1 < self.n_layers() {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            act = out;
        }
        Ok(act)
    }

    /// MSE loss and its gradient over a batch stored flat (`n` rows of
    /// `input_len` / `output_len`). Loss is the mean over batch entries and
    /// output dimensions.
    pub fn loss_and_grad(
        &self,
        inputs: &[f64],
        targets: &[f64],
        n: usize,
    ) -> Result<(f64, Gradient), NetError> {
        assert!(n > 0, "empty batch");
        let d_in = self.input_len();
        let d_out = self.output_len();
        assert_eq!(inputs.len(), n * d_in);
        assert_eq!(targets.len(), n * d_out);

        let layers = self.n_layers();
        let mut grad = Gradient {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        let mut loss = 0.0;
        let scale = 1.0 / (n * d_out) as f64;

        // per-sample activations, reused across the batch
        let mut acts: Vec<Vec<f64>> =
            self.layer_sizes.iter().map(|&s| vec![0.0; s]).collect();
        for s in 0..n {
            let input_row = &inputs[s * d_in..(s + 1) * d_in];
            acts[0].copy_from_slice(input_row);
            for l in 0..layers {
                let (head, tail) = acts.split_at_mut(l + 1);
                self.affine(l, &head[l], &mut tail[0]);
                if l + 1 < layers {
                    tail[0].iter_mut().for_each(|v| *v = v.tanh());
                }
            }

            let target = &targets[s * d_out..(s + 1) * d_out];
            let mut delta: Vec<f64> = acts[layers]
                .iter()
                .zip(target)
                .map(|(p, t)| {
                    let e = p - t;
                    loss += e * e * scale;
                    2.0 * e * scale
                })
                .collect();

            for l in (0..layers).rev() {
                let n_in = self.layer_sizes[l];
                let input = &acts[l];
                let gw = &mut grad.weights[l];
                for (j, dj) in delta.iter().enumerate() {
                    grad.biases[l][j] += dj;
                    let row = &mut gw[j * n_in..(j + 1) * n_in];
                    for (gi, xi) in row.iter_mut().zip(input.iter()) {
                        *gi += dj * xi;
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let mut prev = vec![0.0; n_in];
                    for (j, dj) in delta.iter().enumerate() {
                        let row = &w[j * n_in..(j + 1) * n_in];
                        for (pi, wi) in prev.iter_mut().zip(row) {
                            *pi += dj * wi;
                        }
                    }
                    // through tanh: a' = 1 - a^2
                    for (pi, ai) in prev.iter_mut().zip(input.iter()) {
                        *pi *= 1.0 - ai * ai;
                    }
                    delta = prev;
                }
            }
        }
        if !loss.is_finite() {
            return Err(NetError::NonFiniteLoss);
        }
        Ok((loss, grad))
    }

    /// Loss only (used by the finite-difference oracle in tests).
    pub fn loss(&self, inputs: &[f64], targets: &[f64], n: usize) -> f64 {
        let d_in = self.input_len();
        let d_out = self.output_len();
        let mut loss = 0.0;
        for s in 0..n {
            let pred = self.forward(&inputs[s * d_in..(s + 1) * d_in]).unwrap();
            for (p, t) in pred.iter().zip(&targets[s * d_out..(s + 1) * d_out]) {
                loss += (p - t) * (p - t);
            }
        }
        loss / (n * d_out) as f64
    }

    /// Parameters flattened in a fixed order: per layer, weights then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            v.extend_from_slice(&self.weights[l]);
            v.extend_from_slice(&self.biases[l]);
        }
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut i = 0;
        for l in 0..self.weights.len() {
            let wl = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[i..i + wl]);
            i += wl;
            let bl = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[i..i + bl]);
            i += bl;
        }
    }
}

impl Gradient {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in 0..self.weights.len() {
            v.extend_from_slice(&self.weights[l]);
            v.extend_from_slice(&self.biases[l]);
        }
        v
    }
}

/// Max relative error between analytic and central-difference gradients
/// (step `h = 1e-6`).
pub fn gradient_check(net: &PolicyNet, inputs: &[f64], targets: &[f64], n: usize) -> f64 {
    let (_, grad) = net.loss_and_grad(inputs, targets, n).unwrap();
    let analytic = grad.flat();
    let mut probe = net.clone();
    let base = probe.params_flat();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        probe.set_params_flat(&plus);
        let lp = probe.loss(inputs, targets, n);
        let mut minus = base.clone();
        minus[i] -= h;
        probe.set_params_flat(&minus);
        let lm = probe.loss(inputs, targets, n);
        let numeric = (lp - lm) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}
