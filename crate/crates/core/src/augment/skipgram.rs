//! Skip-gram with negative sampling.
//!
//! Training is single-threaded plain SGD with a linearly decaying learning
//! rate. The per-pair gradient used by the optimizer is the same function the
//! finite-difference checks exercise.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, StageRng};

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One training example: a center word and its positive/negative targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsPair {
    pub center: usize,
    /// `(word, is_positive)`
    pub targets: Vec<(usize, bool)>,
}

/// Input ("word") and output ("context") embedding tables, row-major `V x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramParams {
    pub dim: usize,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl SkipGramParams {
    pub fn vocab_size(&self) -> usize {
        self.input.len() / self.dim.max(1)
    }

    fn dot(&self, center: usize, target: usize) -> f64 {
        let d = self.dim;
        let v = &self.input[center * d..(center + 1) * d];
        let u = &self.output[target * d..(target + 1) * d];
        v.iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// `-ln s(v.u_pos) - sum ln s(-v.u_neg)`
    pub fn pair_loss(&self, pair: &SgnsPair) -> f64 {
        pair.targets
            .iter()
            .map(|&(t, positive)| {
                let score = self.dot(pair.center, t);
                if positive {
                    softplus(-score)
                } else {
                    softplus(score)
                }
            })
            .sum()
    }

    /// Gradient of [`pair_loss`](Self::pair_loss) with respect to the center's
    /// input row (`grad_center`, length `dim`) and each target's output row
    /// (`grad_targets`, `targets.len() * dim`, in target order). Returns the loss.
    pub fn pair_gradient(
        &self,
        pair: &SgnsPair,
        grad_center: &mut [f64],
        grad_targets: &mut Vec<f64>,
    ) -> f64 {
        let d = self.dim;
        grad_center.iter_mut().for_each(|g| *g = 0.0);
        grad_targets.clear();
        grad_targets.resize(pair.targets.len() * d, 0.0);
        let v = &self.input[pair.center * d..(pair.center + 1) * d];
        let mut loss = 0.0;
        for (slot, &(t, positive)) in pair.targets.iter().enumerate() {
            let u = &self.output[t * d..(t + 1) * d];
            let score: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            let label = if positive { 1.0 } else { 0.0 };
            let g = sigmoid(score) - label;
            loss += if positive { softplus(-score) } else { softplus(score) };
            for k in 0..d {
                grad_center[k] += g * u[k];
                grad_targets[slot * d + k] = g * v[k];
            }
        }
        loss
    }

    pub fn batch_loss(&self, batch: &[SgnsPair]) -> f64 {
        batch.iter().map(|p| self.pair_loss(p)).sum()
    }

    /// Full-table gradients of the summed batch loss: `(d_input, d_output)`.
    pub fn batch_gradient(&self, batch: &[SgnsPair]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut d_input = vec![0.0; self.input.len()];
        let mut d_output = vec![0.0; self.output.len()];
        let mut gc = vec![0.0; d];
        let mut gt = Vec::new();
        for pair in batch {
            self.pair_gradient(pair, &mut gc, &mut gt);
            for k in 0..d {
                d_input[pair.center * d + k] += gc[k];
            }
            for (slot, &(t, _)) in pair.targets.iter().enumerate() {
                for k in 0..d {
                    d_output[t * d + k] += gt[slot * d + k];
                }
            }
        }
        (d_input, d_output)
    }

    fn sgd_step(&mut self, pair: &SgnsPair, lr: f64, gc: &mut [f64], gt: &mut Vec<f64>) {
        let d = self.dim;
        self.pair_gradient(pair, gc, gt);
        for (slot, &(t, _)) in pair.targets.iter().enumerate() {
            for k in 0..d {
                self.output[t * d + k] -= lr * gt[slot * d + k];
            }
        }
        for k in 0..d {
            self.input[pair.center * d + k] -= lr * gc[k];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipGramSettings {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative: usize,
    pub min_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

/// Vocabulary sorted by descending count, ties alphabetical.
pub(crate) fn build_vocab(corpus: &[Vec<String>], min_count: usize) -> (Vec<String>, Vec<usize>) {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for sentence in corpus {
        for w in sentence {
            *counts.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> =
        counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    entries.into_iter().map(|(w, c)| (w.to_string(), c)).unzip()
}

/// Unigram^0.75 noise distribution as a cumulative table.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn draw(&self, rng: &mut StageRng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }
}

pub(crate) struct Trained {
    pub words: Vec<String>,
    pub params: SkipGramParams,
}

pub(crate) fn train(corpus: &[Vec<String>], settings: &SkipGramSettings) -> Result<Trained> {
    if settings.dim == 0 || settings.window == 0 {
        return Err(Error::Config("embedding dim and window must be positive".into()));
    }
    let (words, counts) = build_vocab(corpus, settings.min_count.max(1));
    if words.is_empty() {
        return Err(Error::InvalidInput(
            "no word reaches min_count; cannot train embeddings".into(),
        ));
    }
    let index: HashMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut rng = rng_from_seed(settings.seed);
    let d = settings.dim;
    let v = words.len();
    let input = (0..v * d).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect();
    let mut params = SkipGramParams {
        dim: d,
        input,
        output: vec![0.0; v * d],
    };
    let noise = NoiseTable::new(&counts);

    let encoded: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|w| index.get(w.as_str()).copied()).collect())
        .collect();
    let total_tokens: usize = encoded.iter().map(Vec::len).sum();
    let planned = (total_tokens * settings.epochs).max(1) as f64;
    let min_lr = settings.learning_rate * 1e-4;

    let mut gc = vec![0.0; d];
    let mut gt = Vec::new();
    let mut pair = SgnsPair {
        center: 0,
        targets: Vec::with_capacity(settings.negative + 1),
    };
    let mut processed = 0usize;
    for _ in 0..settings.epochs {
        for sentence in &encoded {
            for (i, &center) in sentence.iter().enumerate() {
                let lr = (settings.learning_rate * (1.0 - processed as f64 / planned)).max(min_lr);
                processed += 1;
                let reach = rng.gen_range(1..=settings.window);
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(sentence.len() - 1);
                for (j, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    pair.center = center;
                    pair.targets.clear();
                    pair.targets.push((context, true));
                    for _ in 0..settings.negative {
                        let n = noise.draw(&mut rng);
                        if n != context {
                            pair.targets.push((n, false));
                        }
                    }
                    params.sgd_step(&pair, lr, &mut gc, &mut gt);
                }
            }
        }
    }
    Ok(Trained {
        words,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frozen_params() -> SkipGramParams {
        let mut rng = rng_from_seed(5);
        let (v, d) = (6, 4);
        SkipGramParams {
            dim: d,
            input: (0..v * d).map(|_| rng.gen::<f64>() - 0.5).collect(),
            output: (0..v * d).map(|_| rng.gen::<f64>() - 0.5).collect(),
        }
    }

    fn batch() -> Vec<SgnsPair> {
        vec![
            SgnsPair { center: 0, targets: vec![(1, true), (3, false), (4, false)] },
            SgnsPair { center: 2, targets: vec![(0, true), (5, false), (5, false)] },
            SgnsPair { center: 0, targets: vec![(2, true), (1, false)] },
        ]
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let params = frozen_params();
        let batch = batch();
        let (gi, go) = params.batch_gradient(&batch);
        let h = 1e-6;
        for (table, analytic) in [(0, &gi), (1, &go)] {
            for idx in 0..analytic.len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                let (p, m) = if table == 0 {
                    (&mut plus.input[idx], &mut minus.input[idx])
                } else {
                    (&mut plus.output[idx], &mut minus.output[idx])
                };
                *p += h;
                *m -= h;
                let numeric = (plus.batch_loss(&batch) - minus.batch_loss(&batch)) / (2.0 * h);
                let denom = numeric.abs().max(analytic[idx].abs()).max(1e-8);
                assert!(
                    (numeric - analytic[idx]).abs() / denom < 1e-4 || (numeric - analytic[idx]).abs() < 1e-9,
                    "table {table} idx {idx}: {numeric} vs {}",
                    analytic[idx]
                );
            }
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn vocab_order_is_deterministic() {
        let corpus = vec![vec!["b".to_string(), "a".into(), "b".into(), "c".into()]];
        let (words, counts) = build_vocab(&corpus, 1);
        assert_eq!(words, vec!["b", "a", "c"]);
        assert_eq!(counts, vec![2, 1, 1]);
        assert_eq!(build_vocab(&corpus, 2).0, vec!["b"]);
    }
}
