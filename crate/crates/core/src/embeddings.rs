//! Skip-Gram word vectors with negative sampling, trained from scratch over
//! the dataset vocabulary, and mean-composed sentence vectors.
//!
//! Training is single-threaded and deterministic under a fixed seed: the
//! update schedule is a plain nested loop over epochs, sentences, and window
//! positions, negatives are drawn from the unigram distribution raised to
//! 3/4, and the learning rate decays linearly over the total number of pair
//! updates. Per-epoch mean loss is recorded in the training metadata and
//! logged.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMBEDDING_DIM: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Context window radius on each side.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: EMBEDDING_DIM,
            window: 2,
            negatives: 5,
            epochs: 100,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Mean pair loss per epoch.
    pub epoch_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordVectors {
    pub dim: usize,
    pub table: BTreeMap<String, Vec<f64>>,
    pub training_meta: TrainingMeta,
}

impl WordVectors {
    pub fn get(&self, token: &str) -> Result<&[f64]> {
        self.table
            .get(token)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(format!("token \"{token}\" not in vocabulary")))
    }
}

fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-30.0, 30.0);
    1.0 / (1.0 + (-x).exp())
}

/// One negative-sampling update for a (center, context) pair. Returns the
/// pair loss at the incoming parameters.
fn sgns_update(
    center: &mut [f64],
    outputs: &mut [Vec<f64>],
    context_idx: usize,
    negative_idxs: &[usize],
    lr: f64,
) -> f64 {
    let dim = center.len();
    let mut center_grad = vec![0.0; dim];
    let mut loss = 0.0;
    for (k, &word) in std::iter::once(&context_idx)
        .chain(negative_idxs)
        .enumerate()
    {
        let label = if k == 0 { 1.0 } else { 0.0 };
        let out = &mut outputs[word];
        let dot: f64 = center.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
        let pred = sigmoid(dot);
        loss -= if label > 0.5 {
            pred.max(1e-12).ln()
        } else {
            (1.0 - pred).max(1e-12).ln()
        };
        let g = (label - pred) * lr;
        for d in 0..dim {
            center_grad[d] += g * out[d];
            out[d] += g * center[d];
        }
    }
    for d in 0..dim {
        center[d] += center_grad[d];
    }
    loss
}

/// Train Skip-Gram vectors over tokenized sentences. The vocabulary is
/// exactly the set of corpus tokens.
pub fn train_skipgram(corpus: &[Vec<String>], cfg: &SkipGramConfig) -> Result<WordVectors> {
    let sentences: Vec<&Vec<String>> = corpus.iter().filter(|s| !s.is_empty()).collect();
    if sentences.is_empty() {
        return Err(Error::Config("empty corpus".into()));
    }
    if cfg.dim == 0 || cfg.epochs == 0 || cfg.window == 0 {
        return Err(Error::Config(
            "dim, window, and epochs must be positive".into(),
        ));
    }

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for sentence in &sentences {
        for token in sentence.iter() {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    let vocab: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let index: BTreeMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    // Negative-sampling distribution: unigram counts to the 3/4 power.
    let weights: Vec<f64> = vocab
        .iter()
        .map(|t| (counts[t.as_str()] as f64).powf(0.75))
        .collect();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let total_weight = acc;

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut input_vecs: Vec<Vec<f64>> = (0..vocab.len())
        .map(|_| {
            (0..cfg.dim)
                .map(|_| (rng.gen::<f64>() - 0.5) / cfg.dim as f64)
                .collect()
        })
        .collect();
    let mut output_vecs: Vec<Vec<f64>> = vec![vec![0.0; cfg.dim]; vocab.len()];

    let pairs_per_epoch: usize = sentences
        .iter()
        .map(|s| {
            let n = s.len();
            (0..n)
                .map(|i| {
                    let lo = i.saturating_sub(cfg.window);
                    let hi = (i + cfg.window).min(n - 1);
                    hi - lo
                })
                .sum::<usize>()
        })
        .sum();
    let total_pairs = (pairs_per_epoch * cfg.epochs).max(1);

    let mut processed = 0usize;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut pair_count = 0usize;
        for sentence in &sentences {
            let ids: Vec<usize> = sentence.iter().map(|t| index[t.as_str()]).collect();
            for (i, &center) in ids.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(ids.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let context = ids[j];
                    let lr =
                        cfg.learning_rate * (1.0 - processed as f64 / total_pairs as f64).max(1e-4);
                    let mut negatives = Vec::with_capacity(cfg.negatives);
                    while negatives.len() < cfg.negatives {
                        let r = rng.gen::<f64>() * total_weight;
                        let pick = cumulative.partition_point(|&c| c < r).min(vocab.len() - 1);
                        if pick != context {
                            negatives.push(pick);
                        }
                    }
                    loss_sum += sgns_update(
                        &mut input_vecs[center],
                        &mut output_vecs,
                        context,
                        &negatives,
                        lr,
                    );
                    processed += 1;
                    pair_count += 1;
                }
            }
        }
        let mean = if pair_count > 0 {
            loss_sum / pair_count as f64
        } else {
            0.0
        };
        log::debug!("skipgram epoch {epoch}: mean pair loss {mean:.6}");
        epoch_loss.push(mean);
    }

    let table: BTreeMap<String, Vec<f64>> = vocab.into_iter().zip(input_vecs).collect();
    for vector in table.values() {
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "non-finite embedding after training".into(),
            ));
        }
    }
    Ok(WordVectors {
        dim: cfg.dim,
        table,
        training_meta: TrainingMeta {
            window: cfg.window,
            negatives: cfg.negatives,
            epochs: cfg.epochs,
            seed: cfg.seed,
            learning_rate: cfg.learning_rate,
            epoch_loss,
        },
    })
}

/// Unweighted mean of member word vectors; the empty token list composes to
/// the zero vector.
pub fn sentence_vector(tokens: &[String], wv: &WordVectors) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Ok(vec![0.0; wv.dim]);
    }
    let mut sum = vec![0.0; wv.dim];
    for token in tokens {
        let v = wv.get(token)?;
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = tokens.len() as f64;
    for s in &mut sum {
        *s /= n;
    }
    Ok(sum)
}

/// Mean of the per-descriptor sentence vectors; zero when no descriptors.
pub fn descriptor_vector(descriptors: &[String], wv: &WordVectors) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Ok(vec![0.0; wv.dim]);
    }
    let mut sum = vec![0.0; wv.dim];
    for descriptor in descriptors {
        let tokens = crate::names::tokenize(descriptor);
        let v = sentence_vector(&tokens, wv)?;
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = descriptors.len() as f64;
    for s in &mut sum {
        *s /= n;
    }
    Ok(sum)
}

const VECTORS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VersionedVectors {
    version: u32,
    vectors: WordVectors,
}

pub fn save_vectors(wv: &WordVectors, path: &Path) -> Result<()> {
    let wrapped = VersionedVectors {
        version: VECTORS_VERSION,
        vectors: wv.clone(),
    };
    std::fs::write(path, serde_json::to_string(&wrapped)?)?;
    Ok(())
}

pub fn load_vectors(path: &Path) -> Result<WordVectors> {
    let text = std::fs::read_to_string(path)?;
    let wrapped: VersionedVectors = serde_json::from_str(&text)?;
    if wrapped.version != VECTORS_VERSION {
        return Err(Error::Schema(format!(
            "vector file version {}, expected {VECTORS_VERSION}",
            wrapped.version
        )));
    }
    Ok(wrapped.vectors)
}
