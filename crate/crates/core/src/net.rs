//! Small feed-forward network with manual backpropagation.
//!
//! Parameters live in one flat `Vec<f64>` (per layer: row-major weights,
//! then biases) so the optimizer, finite-difference checks, and checkpoints
//! all see the same layout. Hidden layers use tanh or ReLU; the output layer
//! is a single identity unit.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "TANH")]
    Tanh,
    #[serde(rename = "RELU")]
    Relu,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a = act(z)`.
    fn derivative_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Feed-forward network mapping `dims[0]` inputs to one scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    /// Start offset of each layer's block in `params`.
    layer_offsets: Vec<usize>,
}

/// Per-layer activations recorded by [`Mlp::forward_traced`], consumed by
/// [`Mlp::backward`].
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `activations[0]` is the input; `activations[l]` the output of layer l.
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    fn layout(dims: &[usize]) -> Result<(Vec<usize>, usize)> {
        if dims.len() < 2 {
            return Err(Error::Config(
                "network needs at least input and output dims".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        if *dims.last().unwrap() != 1 {
            return Err(Error::Config("output dim must be 1".into()));
        }
        let mut offsets = Vec::with_capacity(dims.len() - 1);
        let mut total = 0usize;
        for w in dims.windows(2) {
            offsets.push(total);
            total += w[0] * w[1] + w[1];
        }
        Ok((offsets, total))
    }

    /// All-zero parameters.
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        let (layer_offsets, total) = Self::layout(dims)?;
        Ok(Mlp {
            dims: dims.to_vec(),
            activation,
            params: vec![0.0; total],
            layer_offsets,
        })
    }

    /// Glorot-uniform weights, zero biases, seeded.
    pub fn glorot(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(dims, activation)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..net.layer_count() {
            let (fan_in, fan_out) = (net.dims[l], net.dims[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let off = net.layer_offsets[l];
            for i in 0..fan_in * fan_out {
                net.params[off + i] = rng.gen_range(-a..a);
            }
        }
        Ok(net)
    }

    pub fn from_params(dims: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let (layer_offsets, total) = Self::layout(dims)?;
        if params.len() != total {
            return Err(Error::Config(format!(
                "parameter count mismatch: expected {total}, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite parameter".into()));
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            activation,
            params,
            layer_offsets,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Flat index of weight (out, in) in `layer`.
    pub fn weight_index(&self, layer: usize, out: usize, inp: usize) -> usize {
        self.layer_offsets[layer] + out * self.dims[layer] + inp
    }

    /// Flat index of bias `out` in `layer`.
    pub fn bias_index(&self, layer: usize, out: usize) -> usize {
        self.layer_offsets[layer] + self.dims[layer] * self.dims[layer + 1] + out
    }

    /// Scalar output for one input.
    pub fn forward(&self, input: &[f64]) -> f64 {
        debug_assert_eq!(input.len(), self.input_dim());
        let mut cur = input.to_vec();
        for l in 0..self.layer_count() {
            cur = self.layer_forward(l, &cur);
        }
        cur[0]
    }

    fn layer_forward(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
        let off = self.layer_offsets[l];
        let bias_off = off + fan_in * fan_out;
        let last = l + 1 == self.dims.len() - 1;
        let mut out = Vec::with_capacity(fan_out);
        for o in 0..fan_out {
            let mut z = self.params[bias_off + o];
            let row = off + o * fan_in;
            for (i, &x) in input.iter().enumerate() {
                z += self.params[row + i] * x;
            }
            out.push(if last { z } else { self.activation.apply(z) });
        }
        out
    }

    /// Forward pass recording activations for a subsequent backward pass.
    pub fn forward_traced(&self, input: &[f64], trace: &mut Trace) -> f64 {
        debug_assert_eq!(input.len(), self.input_dim());
        trace.activations.clear();
        trace.activations.push(input.to_vec());
        for l in 0..self.layer_count() {
            let next = self.layer_forward(l, trace.activations.last().unwrap());
            trace.activations.push(next);
        }
        trace.activations.last().unwrap()[0]
    }

    /// Accumulates `upstream * d(output)/d(params)` into `grads`, which must
    /// have `param_count` entries. `trace` must come from `forward_traced`
    /// on the same parameters.
    pub fn backward(&self, trace: &Trace, upstream: f64, grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.param_count());
        let layers = self.layer_count();
        let mut delta = vec![upstream];
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offsets[l];
            let bias_off = off + fan_in * fan_out;
            let input = &trace.activations[l];
            for o in 0..fan_out {
                let d = delta[o];
                let row = off + o * fan_in;
                for (i, &x) in input.iter().enumerate() {
                    grads[row + i] += d * x;
                }
                grads[bias_off + o] += d;
            }
            if l > 0 {
                let mut prev = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let d = delta[o];
                    let row = off + o * fan_in;
                    for (i, p) in prev.iter_mut().enumerate() {
                        *p += d * self.params[row + i];
                    }
                }
                // Chain through the previous layer's activation.
                for (i, p) in prev.iter_mut().enumerate() {
                    *p *= self
                        .activation
                        .derivative_from_output(trace.activations[l][i]);
                }
                delta = prev;
            }
        }
    }
}

/// AdamW with decoupled weight decay applied to every parameter.
#[derive(Debug, Clone)]
pub struct AdamW {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(param_count: usize, weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
    }
}

/// Linear warmup to `lr_max` over `warmup_steps`, then cosine decay towards
/// zero over the remaining steps. `step` is 0-based.
pub fn warmup_cosine_lr(step: usize, total_steps: usize, warmup_steps: usize, lr_max: f64) -> f64 {
    if warmup_steps > 0 && step < warmup_steps {
        return lr_max * (step + 1) as f64 / warmup_steps as f64;
    }
    let decay_steps = total_steps.saturating_sub(warmup_steps);
    if decay_steps == 0 {
        return lr_max;
    }
    let progress = (step - warmup_steps) as f64 / decay_steps as f64;
    lr_max * 0.5 * (1.0 + (std::f64::consts::PI * progress.min(1.0)).cos())
}

/// Numerically stable sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^t)`.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - max - log_sum).collect()
}
