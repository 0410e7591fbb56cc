//! A from-scratch multilayer perceptron.
//!
//! The judgment classifier is a fixed stack: dense layers of 32, 128, and 64
//! units with tanh, ELU, and tanh activations, then a 5-way softmax. Training
//! minimizes mean categorical cross-entropy with Adam. Everything runs in f64
//! and is deterministic under a fixed seed; gradients are exact (verified
//! against central finite differences in the tests and acceptance suite).

#![allow(clippy::needless_range_loop)]

use std::io::Read;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden widths of the judgment classifier.
pub const HIDDEN_DIMS: [usize; 3] = [32, 128, 64];
/// Output classes (naturalness scores 1..=5).
pub const NUM_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Elu,
    Softmax,
}

impl Activation {
    fn id(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Elu => 1,
            Activation::Softmax => 2,
        }
    }

    fn from_id(id: u8) -> Result<Activation> {
        match id {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Elu),
            2 => Ok(Activation::Softmax),
            other => Err(Error::Schema(format!("unknown activation id {other}"))),
        }
    }

    /// Apply in place over a pre-activation vector.
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Tanh => {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
            Activation::Elu => {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = ELU_ALPHA * (v.exp() - 1.0);
                    }
                }
            }
            Activation::Softmax => {
                let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in z.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in z.iter_mut() {
                    *v /= sum;
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation, computed from the
    /// activation output. Not defined for softmax (handled fused with the
    /// cross-entropy gradient).
    fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            // For negative inputs a = alpha*(e^z - 1), so alpha*e^z = a + alpha.
            Activation::Elu => {
                if a > 0.0 {
                    1.0
                } else {
                    a + ELU_ALPHA
                }
            }
            Activation::Softmax => unreachable!("softmax gradient is fused with the loss"),
        }
    }
}

pub const ELU_ALPHA: f64 = 1.0;

/// One dense layer, row-major weights of shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(z);
        }
        self.activation.apply(out);
    }
}

/// The multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// Build a model with the given layer dimensions (input first) and one
    /// activation per layer. Weights are Glorot-uniform, biases zero,
    /// deterministic per seed.
    pub fn with_dims(dims: &[usize], activations: &[Activation], seed: u64) -> Result<MlpModel> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dimensions {dims:?}")));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::Config(format!(
                "{} activations for {} layers",
                activations.len(),
                dims.len() - 1
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for (l, window) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (window[0], window[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let weights: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| dist.sample(&mut rng))
                .collect();
            layers.push(Layer {
                in_dim: fan_in,
                out_dim: fan_out,
                activation: activations[l],
                weights,
                biases: vec![0.0; fan_out],
            });
        }
        Ok(MlpModel { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    /// Forward pass to the class-probability vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Config(format!(
                "input length {} does not match model input dim {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Forward pass keeping every layer's activation (index 0 is the input).
    fn forward_trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let mut out = Vec::new();
            layer.forward_into(acts.last().unwrap(), &mut out);
            acts.push(out);
        }
        acts
    }

    fn param_tensors(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        for layer in &self.layers {
            sizes.push(layer.weights.len());
            sizes.push(layer.biases.len());
        }
        sizes
    }

    /// Mean cross-entropy over a batch and its parameter gradients, laid out
    /// as `[w0, b0, w1, b1, ...]`.
    pub fn loss_and_gradients(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::Config("empty or mismatched batch".into()));
        }
        let n_layers = self.layers.len();
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(2 * n_layers);
        for layer in &self.layers {
            grads.push(vec![0.0; layer.weights.len()]);
            grads.push(vec![0.0; layer.biases.len()]);
        }

        let scale = 1.0 / inputs.len() as f64;
        let mut loss = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            if y.len() != self.output_dim() {
                return Err(Error::Config(
                    "target width does not match output dim".into(),
                ));
            }
            let acts = self.forward_trace(x);
            let probs = acts.last().unwrap();
            for (p, t) in probs.iter().zip(y) {
                if *t > 0.0 {
                    loss -= t * p.ln() * scale;
                }
            }

            // Output delta for softmax + cross-entropy with targets that sum
            // to one: p - y.
            let mut delta: Vec<f64> = probs.iter().zip(y).map(|(p, t)| (p - t) * scale).collect();

            for l in (0..n_layers).rev() {
                let layer = &self.layers[l];
                let input_act = &acts[l];
                let dw = &mut grads[2 * l];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    let row = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (g, a) in row.iter_mut().zip(input_act) {
                        *g += d * a;
                    }
                }
                let db = &mut grads[2 * l + 1];
                for (g, d) in db.iter_mut().zip(&delta) {
                    *g += d;
                }

                if l > 0 {
                    let below = &self.layers[l - 1];
                    let out_act = &acts[l];
                    let mut next_delta = vec![0.0; layer.in_dim];
                    for o in 0..layer.out_dim {
                        let d = delta[o];
                        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (nd, w) in next_delta.iter_mut().zip(row) {
                            *nd += d * w;
                        }
                    }
                    for (nd, a) in next_delta.iter_mut().zip(out_act) {
                        *nd *= below.activation.grad_from_output(*a);
                    }
                    delta = next_delta;
                }
            }
        }

        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss over batch of {} (inputs dim {})",
                inputs.len(),
                self.input_dim()
            )));
        }
        Ok((loss, grads))
    }

    fn apply_update(&mut self, updates: &[Vec<f64>]) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, u) in layer.weights.iter_mut().zip(&updates[2 * l]) {
                *w += u;
            }
            for (b, u) in layer.biases.iter_mut().zip(&updates[2 * l + 1]) {
                *b += u;
            }
        }
    }
}

/// Build the judgment classifier: `input -> 32 -> 128 -> 64 -> 5` with tanh,
/// ELU, tanh, and softmax.
pub fn init_model(input_dim: usize, seed: u64) -> Result<MlpModel> {
    if input_dim == 0 {
        return Err(Error::Config("input dimension must be positive".into()));
    }
    let dims = [
        input_dim,
        HIDDEN_DIMS[0],
        HIDDEN_DIMS[1],
        HIDDEN_DIMS[2],
        NUM_CLASSES,
    ];
    let activations = [
        Activation::Tanh,
        Activation::Elu,
        Activation::Tanh,
        Activation::Softmax,
    ];
    MlpModel::with_dims(&dims, &activations, seed)
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Adam moment estimates, one pair of tensors per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel, cfg: AdamConfig) -> AdamState {
        let sizes = model.param_tensors();
        AdamState {
            cfg,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            t: 0,
        }
    }

    /// One bias-corrected step; returns the parameter updates to add.
    pub fn step(&mut self, grads: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.t += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let mut updates = Vec::with_capacity(grads.len());
        for (tensor, g) in grads.iter().enumerate() {
            let m = &mut self.m[tensor];
            let v = &mut self.v[tensor];
            let mut u = vec![0.0; g.len()];
            for i in 0..g.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                u[i] = -c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
            updates.push(u);
        }
        updates
    }
}

/// One optimization step on a batch. Returns the loss at the parameters
/// before the update.
pub fn train_step(
    model: &mut MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    opt: &mut AdamState,
) -> Result<f64> {
    for y in targets {
        let sum: f64 = y.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "target row sums to {sum}, expected 1"
            )));
        }
    }
    let (loss, grads) = model.loss_and_gradients(inputs, targets)?;
    let updates = opt.step(&grads);
    model.apply_update(&updates);
    Ok(loss)
}

/// Training regime for the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            batch_size: 50,
            optimizer: AdamConfig::default(),
            seed: 0,
            shuffle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// Total optimization steps taken.
    pub steps: usize,
}

/// Train for `cfg.epochs` epochs of `ceil(n / batch_size)` steps each, with
/// per-epoch seeded shuffling. Deterministic per seed.
pub fn train(
    model: &mut MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Config("empty or mismatched training set".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config(
            "epochs and batch_size must be positive".into(),
        ));
    }
    let mut opt = AdamState::new(model, cfg.optimizer);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
        }
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch_x: Vec<Vec<f64>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let batch_y: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
            let loss = train_step(model, &batch_x, &batch_y, &mut opt).map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("epoch {epoch}: {m}")),
                other => other,
            })?;
            sum += loss;
            batches += 1;
            steps += 1;
        }
        epoch_loss.push(sum / batches as f64);
    }
    Ok(TrainReport { epoch_loss, steps })
}

const MODEL_MAGIC: &[u8; 4] = b"EMLP";
const MODEL_VERSION: u32 = 1;

/// Write the model in the versioned little-endian binary format.
pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    out.extend_from_slice(&(model.input_dim() as u32).to_le_bytes());
    for layer in &model.layers {
        out.extend_from_slice(&(layer.out_dim as u32).to_le_bytes());
    }
    for layer in &model.layers {
        out.push(layer.activation.id());
    }
    for layer in &model.layers {
        for w in &layer.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in &layer.biases {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Load a model saved by [`save_model`]. Truncation, bad magic, and version
/// mismatches are errors.
pub fn load_model(path: &Path) -> Result<MlpModel> {
    let mut file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    let mut take = |n: usize| -> Result<&[u8]> {
        if cursor + n > bytes.len() {
            return Err(Error::Schema("truncated model file".into()));
        }
        let slice = &bytes[cursor..cursor + n];
        cursor += n;
        Ok(slice)
    };

    if take(4)? != MODEL_MAGIC {
        return Err(Error::Schema("not a model file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::Schema(format!(
            "model file version {version}, expected {MODEL_VERSION}"
        )));
    }
    let n_layers = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut dims = vec![u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize];
    for _ in 0..n_layers {
        dims.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
    }
    let mut activations = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        activations.push(Activation::from_id(take(1)?[0])?);
    }
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (in_dim, out_dim) = (dims[l], dims[l + 1]);
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim * out_dim {
            weights.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        let mut biases = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            biases.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        layers.push(Layer {
            in_dim,
            out_dim,
            activation: activations[l],
            weights,
            biases,
        });
    }
    if cursor != bytes.len() {
        return Err(Error::Schema("trailing bytes in model file".into()));
    }
    let model = MlpModel { layers };
    if model
        .layers
        .iter()
        .any(|l| l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()))
    {
        return Err(Error::Numerical(
            "model file contains non-finite parameters".into(),
        ));
    }
    Ok(model)
}
