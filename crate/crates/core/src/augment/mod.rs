//! Embedding-based paraphrase augmentation.
//!
//! A skip-gram model is trained on the training tweets; minority tweets are
//! then paraphrased by replacing each token, with probability `replace_prob`,
//! by a uniform pick among its `top_k` most similar vocabulary words.
//!
//! RNG consumption per token is fixed: one coin flip, then one neighbor draw
//! only if the coin says replace and the token has neighbors.

pub mod skipgram;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{derived_id, Dataset, Example, Label, Tweet};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, StageRng};

pub use skipgram::{SgnsPair, SkipGramParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub replace_prob: f64,
    pub top_k: usize,
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative: usize,
    pub min_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            replace_prob: 0.9,
            top_k: 5,
            dim: 100,
            window: 5,
            epochs: 5,
            negative: 5,
            min_count: 1,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.replace_prob) {
            return Err(Error::Config(format!(
                "replace_prob must lie in [0, 1], got {}",
                self.replace_prob
            )));
        }
        if self.dim == 0 || self.window == 0 {
            return Err(Error::Config("dim and window must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Word vectors (the skip-gram input table).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f64>,
    norms: Vec<f64>,
    trained_on: String,
}

/// Hex digest identifying a token corpus.
pub fn corpus_fingerprint(corpus: &[Vec<String>]) -> String {
    let mut hasher = Sha256::new();
    for sentence in corpus {
        hasher.update(sentence.join(" ").as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(&hasher.finalize()[..16])
}

pub fn train_embeddings(corpus: &[Vec<String>], config: &AugmentConfig) -> Result<EmbeddingModel> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidInput("cannot train embeddings on an empty corpus".into()));
    }
    let trained = skipgram::train(
        corpus,
        &skipgram::SkipGramSettings {
            dim: config.dim,
            window: config.window,
            epochs: config.epochs,
            negative: config.negative,
            min_count: config.min_count,
            learning_rate: config.learning_rate,
            seed: config.seed,
        },
    )?;
    EmbeddingModel::from_vectors(
        trained.words,
        config.dim,
        trained.params.input,
        corpus_fingerprint(corpus),
    )
}

impl EmbeddingModel {
    pub fn from_vectors(
        words: Vec<String>,
        dim: usize,
        vectors: Vec<f64>,
        trained_on: String,
    ) -> Result<Self> {
        if vectors.len() != words.len() * dim {
            return Err(Error::InvalidInput(format!(
                "{} words of dim {dim} need {} values, got {}",
                words.len(),
                words.len() * dim,
                vectors.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("embedding contains non-finite values".into()));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let norms = vectors
            .chunks(dim.max(1))
            .map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Ok(EmbeddingModel {
            words,
            index,
            dim,
            vectors,
            norms,
            trained_on,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn trained_on(&self) -> &str {
        &self.trained_on
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        let i = *self.index.get(word)?;
        Some(&self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    fn cosine_rows(&self, a: usize, b: usize) -> f64 {
        let d = self.dim;
        let denom = self.norms[a] * self.norms[b];
        if denom == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.vectors[a * d..(a + 1) * d]
            .iter()
            .zip(&self.vectors[b * d..(b + 1) * d])
            .map(|(x, y)| x * y)
            .sum();
        dot / denom
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.cosine_rows(*self.index.get(a)?, *self.index.get(b)?))
    }

    /// Up to `k` other words by descending cosine similarity (ties by
    /// vocabulary order). Unknown words get an empty list.
    pub fn most_similar(&self, word: &str, k: usize) -> Vec<(String, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let Some(&q) = self.index.get(word) else {
            return Vec::new();
        };
        let mut scored: Vec<(usize, f64)> = (0..self.words.len())
            .filter(|&i| i != q)
            .map(|i| (i, self.cosine_rows(q, i)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
            .into_iter()
            .map(|(i, c)| (self.words[i].clone(), c))
            .collect()
    }

    /// Plain-text vector format: `V d`, then `word v1 ... vd` per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.words.len(), self.dim);
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, message: &str| Error::Parse {
            path: "embeddings".into(),
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing `V d` header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| err(1, "bad header")))
            .collect::<Result<_>>()?;
        let [v, d] = dims[..] else {
            return Err(err(1, "header must be `V d`"));
        };
        let mut words = Vec::with_capacity(v);
        let mut vectors = Vec::with_capacity(v * d);
        for (i, line) in lines.enumerate() {
            let mut parts = line.split(' ');
            let word = parts.next().ok_or_else(|| err(i + 2, "empty line"))?;
            let row: Vec<f64> = parts
                .map(|x| x.parse().map_err(|_| err(i + 2, "bad number")))
                .collect::<Result<_>>()?;
            if row.len() != d {
                return Err(err(i + 2, "wrong vector length"));
            }
            words.push(word.to_string());
            vectors.extend(row);
        }
        if words.len() != v {
            return Err(err(1, "word count does not match header"));
        }
        EmbeddingModel::from_vectors(words, d, vectors, String::new())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        EmbeddingModel::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Anything that can propose replacement words.
pub trait NeighborSource {
    fn neighbors(&self, word: &str, k: usize) -> Vec<String>;
}

impl NeighborSource for EmbeddingModel {
    fn neighbors(&self, word: &str, k: usize) -> Vec<String> {
        self.most_similar(word, k).into_iter().map(|(w, _)| w).collect()
    }
}

impl<T: NeighborSource + ?Sized> NeighborSource for &T {
    fn neighbors(&self, word: &str, k: usize) -> Vec<String> {
        (**self).neighbors(word, k)
    }
}

impl NeighborSource for HashMap<String, Vec<String>> {
    fn neighbors(&self, word: &str, k: usize) -> Vec<String> {
        self.get(word)
            .map(|n| n.iter().take(k).cloned().collect())
            .unwrap_or_default()
    }
}

/// Memoizes neighbor lists per distinct token.
pub struct CachedNeighbors<'a, S: NeighborSource> {
    source: &'a S,
    k: usize,
    cache: HashMap<String, Vec<String>>,
}

impl<'a, S: NeighborSource> CachedNeighbors<'a, S> {
    pub fn new(source: &'a S, k: usize) -> Self {
        CachedNeighbors {
            source,
            k,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, word: &str) -> &[String] {
        if !self.cache.contains_key(word) {
            let n = self.source.neighbors(word, self.k);
            self.cache.insert(word.to_string(), n);
        }
        &self.cache[word]
    }
}

fn paraphrase_cached<S: NeighborSource>(
    tokens: &[String],
    neighbors: &mut CachedNeighbors<'_, S>,
    replace_prob: f64,
    rng: &mut StageRng,
) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            let replace = rng.gen::<f64>() < replace_prob;
            if !replace {
                return t.clone();
            }
            let options = neighbors.get(t);
            if options.is_empty() {
                t.clone()
            } else {
                options[rng.gen_range(0..options.len())].clone()
            }
        })
        .collect()
}

/// Paraphrase one tweet. Output length always equals input length.
pub fn paraphrase<S: NeighborSource>(
    tokens: &[String],
    source: &S,
    config: &AugmentConfig,
    rng: &mut StageRng,
) -> Vec<String> {
    let mut cache = CachedNeighbors::new(source, config.top_k);
    paraphrase_cached(tokens, &mut cache, config.replace_prob, rng)
}

/// Add paraphrases of uniformly drawn real tweets until each class in
/// `targets` reaches its target count. Originals are kept untouched and the
/// new rows are flagged synthetic.
pub fn generate_to_targets<S: NeighborSource>(
    dataset: &Dataset,
    source: &S,
    config: &AugmentConfig,
    targets: &BTreeMap<Label, usize>,
) -> Result<Dataset> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let mut cache = CachedNeighbors::new(source, config.top_k);
    let counts = dataset.class_counts();
    let mut examples = dataset.examples().to_vec();
    for (&label, &target) in targets {
        let have = counts.get(&label).copied().unwrap_or(0);
        if target <= have {
            continue;
        }
        let pool: Vec<&Example> = dataset.examples().iter().filter(|e| e.label == label).collect();
        if pool.is_empty() {
            return Err(Error::InvalidInput(format!(
                "cannot synthesize class {label}: it has no examples"
            )));
        }
        for n in 0..target - have {
            let src = pool[rng.gen_range(0..pool.len())];
            let tokens = paraphrase_cached(&src.tweet.tokens, &mut cache, config.replace_prob, &mut rng);
            let tweet = Tweet {
                id: derived_id(&src.tweet.id, true, n),
                raw_text: tokens.join(" "),
                tokens,
            };
            examples.push(Example::new(tweet, label));
        }
    }
    Dataset::new(dataset.task(), examples)
}

/// Raise every minority class to the majority count with paraphrases.
pub fn generate_balanced<S: NeighborSource>(
    dataset: &Dataset,
    source: &S,
    config: &AugmentConfig,
) -> Result<Dataset> {
    let counts = dataset.class_counts();
    let majority = counts.values().copied().max().unwrap_or(0);
    let targets = counts.keys().map(|&l| (l, majority)).collect();
    generate_to_targets(dataset, source, config, &targets)
}
