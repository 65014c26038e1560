//! N-gram vocabularies with bag-of-words and TF-IDF sparse encodings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAX_NGRAM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NGramConfig {
    pub min_n: usize,
    pub max_n: usize,
    pub min_df: usize,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            min_n: 1,
            max_n: 1,
            min_df: 1,
        }
    }
}

impl NGramConfig {
    pub fn new(min_n: usize, max_n: usize) -> Result<Self> {
        let config = NGramConfig {
            min_n,
            max_n,
            min_df: 1,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_n < 1 || self.max_n < self.min_n || self.max_n > MAX_NGRAM {
            return Err(Error::Config(format!(
                "n-gram range ({}, {}) must satisfy 1 <= min_n <= max_n <= {MAX_NGRAM}",
                self.min_n, self.max_n
            )));
        }
        if self.min_df < 1 {
            return Err(Error::Config("min_df must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Counts,
    #[default]
    Tfidf,
    /// Counts block followed by the TF-IDF block.
    Concat,
}

/// All contiguous n-grams, shortest first, left to right within each length.
pub fn extract_ngrams(tokens: &[String], config: &NGramConfig) -> Vec<String> {
    let mut out = Vec::new();
    for n in config.min_n..=config.max_n {
        if n > tokens.len() {
            break;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Sparse row with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from unordered pairs; duplicate indices are summed and zeros dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in pairs {
            if i >= dim {
                return Err(Error::InvalidInput(format!("index {i} out of range for dim {dim}")));
            }
            *merged.entry(i).or_default() += v;
        }
        let (indices, values) = merged.into_iter().filter(|&(_, v)| v != 0.0).unzip();
        Ok(SparseVector {
            dim,
            indices,
            values,
        })
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        SparseVector {
            dim: dense.len(),
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            dense[i] = v;
        }
        dense
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Squared Euclidean distance, accumulated over the union of supports in
    /// increasing index order.
    pub fn squared_distance(&self, other: &SparseVector) -> f64 {
        let (a, b) = (self, other);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.indices.len() || j < b.indices.len() {
            let ai = a.indices.get(i).copied().unwrap_or(usize::MAX);
            let bj = b.indices.get(j).copied().unwrap_or(usize::MAX);
            let d = if ai == bj {
                let d = a.values[i] - b.values[j];
                i += 1;
                j += 1;
                d
            } else if ai < bj {
                i += 1;
                a.values[i - 1]
            } else {
                j += 1;
                -b.values[j - 1]
            };
            acc += d * d;
        }
        acc
    }

    pub fn distance(&self, other: &SparseVector) -> f64 {
        self.squared_distance(other).sqrt()
    }

    /// `self + gap * (other - self)`, with exact zeros dropped.
    pub fn interpolate(&self, other: &SparseVector, gap: f64) -> SparseVector {
        let (a, b) = (self, other);
        let (mut i, mut j) = (0, 0);
        let mut indices = Vec::with_capacity(a.nnz() + b.nnz());
        let mut values = Vec::with_capacity(a.nnz() + b.nnz());
        while i < a.indices.len() || j < b.indices.len() {
            let ai = a.indices.get(i).copied().unwrap_or(usize::MAX);
            let bj = b.indices.get(j).copied().unwrap_or(usize::MAX);
            let (idx, x, y) = if ai == bj {
                i += 1;
                j += 1;
                (ai, a.values[i - 1], b.values[j - 1])
            } else if ai < bj {
                i += 1;
                (ai, a.values[i - 1], 0.0)
            } else {
                j += 1;
                (bj, 0.0, b.values[j - 1])
            };
            let v = x + gap * (y - x);
            if v != 0.0 {
                indices.push(idx);
                values.push(v);
            }
        }
        SparseVector {
            dim: self.dim,
            indices,
            values,
        }
    }

    fn scaled(mut self, factor: f64) -> Self {
        for v in &mut self.values {
            *v *= factor;
        }
        self
    }

    fn concat(self, other: SparseVector) -> SparseVector {
        let offset = self.dim;
        let mut indices = self.indices;
        let mut values = self.values;
        indices.extend(other.indices.iter().map(|i| i + offset));
        values.extend(other.values);
        SparseVector {
            dim: offset + other.dim,
            indices,
            values,
        }
    }
}

/// Rows plus parallel class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    n_classes: usize,
    rows: Vec<SparseVector>,
    labels: Vec<usize>,
    representation: Representation,
}

impl FeatureMatrix {
    pub fn new(
        dim: usize,
        n_classes: usize,
        rows: Vec<SparseVector>,
        labels: Vec<usize>,
        representation: Representation,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.dim(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {n_classes} classes"
            )));
        }
        Ok(FeatureMatrix {
            dim,
            n_classes,
            rows,
            labels,
            representation,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn rows_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    /// New matrix of the given rows (by index, repeats allowed) with the same shape metadata.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            dim: self.dim,
            n_classes: self.n_classes,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            representation: self.representation,
        }
    }

    pub(crate) fn with_rows(&self, rows: Vec<SparseVector>, labels: Vec<usize>) -> FeatureMatrix {
        FeatureMatrix {
            dim: self.dim,
            n_classes: self.n_classes,
            rows,
            labels,
            representation: self.representation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    term_index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    config: NGramConfig,
}

/// Document-frequency threshold applied; index = lexicographic rank of the term.
pub fn fit_vocabulary(docs: &[Vec<String>], config: &NGramConfig) -> Result<Vocabulary> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::InvalidInput("cannot fit a vocabulary on an empty corpus".into()));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        let distinct: BTreeSet<String> = extract_ngrams(doc, config).into_iter().collect();
        for term in distinct {
            *df.entry(term).or_default() += 1;
        }
    }
    let (terms, doc_freq): (Vec<String>, Vec<usize>) =
        df.into_iter().filter(|&(_, f)| f >= config.min_df).unzip();
    Ok(Vocabulary::from_parts(terms, doc_freq, docs.len(), *config))
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>, n_docs: usize, config: NGramConfig) -> Self {
        let term_index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            terms,
            term_index,
            doc_freq,
            n_docs,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    /// Smoothed inverse document frequency `ln((1 + n) / (1 + df)) + 1`.
    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[index] as f64)).ln() + 1.0
    }

    pub fn output_dim(&self, representation: Representation) -> usize {
        match representation {
            Representation::Concat => 2 * self.len(),
            _ => self.len(),
        }
    }

    pub fn counts(&self, tokens: &[String]) -> SparseVector {
        let pairs = extract_ngrams(tokens, &self.config)
            .into_iter()
            .filter_map(|g| self.index_of(&g))
            .map(|i| (i, 1.0));
        SparseVector::from_pairs(self.len(), pairs).expect("indices come from the vocabulary")
    }

    pub fn tfidf(&self, tokens: &[String]) -> SparseVector {
        self.tfidf_from_counts(self.counts(tokens))
    }

    fn tfidf_from_counts(&self, mut counts: SparseVector) -> SparseVector {
        for (i, v) in counts.indices.iter().zip(counts.values.iter_mut()) {
            *v *= self.idf(*i);
        }
        let norm = counts.norm();
        if norm > 0.0 {
            counts.scaled(1.0 / norm)
        } else {
            counts
        }
    }

    pub fn encode(&self, tokens: &[String], representation: Representation) -> SparseVector {
        match representation {
            Representation::Counts => self.counts(tokens),
            Representation::Tfidf => self.tfidf(tokens),
            Representation::Concat => {
                let counts = self.counts(tokens);
                let tfidf = self.tfidf_from_counts(counts.clone());
                counts.concat(tfidf)
            }
        }
    }

    /// Line-oriented form: a header line, then `term\tindex\tdoc_freq`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "#vocabulary\tn_docs={}\tmin_n={}\tmax_n={}\tmin_df={}\n",
            self.n_docs, self.config.min_n, self.config.max_n, self.config.min_df
        );
        for (i, (term, df)) in self.terms.iter().zip(&self.doc_freq).enumerate() {
            let _ = writeln!(out, "{term}\t{i}\t{df}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: "vocabulary".into(),
            line,
            message,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let mut fields = header.split('\t');
        if fields.next() != Some("#vocabulary") {
            return Err(parse_err(1, "header must start with #vocabulary".into()));
        }
        let mut kv = HashMap::new();
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| parse_err(1, format!("bad header field `{f}`")))?;
            let v: usize = v
                .parse()
                .map_err(|_| parse_err(1, format!("bad number in `{f}`")))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| parse_err(1, format!("missing {k}")));
        let config = NGramConfig {
            min_n: get("min_n")?,
            max_n: get("max_n")?,
            min_df: get("min_df")?,
        };
        let n_docs = get("n_docs")?;
        let mut terms = Vec::new();
        let mut doc_freq = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(parse_err(i + 2, "expected term, index and doc_freq".into()));
            }
            let index: usize = cols[1]
                .parse()
                .map_err(|_| parse_err(i + 2, "bad index".into()))?;
            if index != i {
                return Err(parse_err(i + 2, format!("index {index} is not dense (expected {i})")));
            }
            let df: usize = cols[2]
                .parse()
                .map_err(|_| parse_err(i + 2, "bad doc_freq".into()))?;
            if df == 0 || df > n_docs {
                return Err(parse_err(i + 2, format!("doc_freq {df} outside [1, {n_docs}]")));
            }
            terms.push(cols[0].to_string());
            doc_freq.push(df);
        }
        Ok(Vocabulary::from_parts(terms, doc_freq, n_docs, config))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Vocabulary::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Hex digest of the serialized vocabulary.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        hex::encode(&digest[..16])
    }
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    text: String,
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        VocabularyRepr { text: self.to_text() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = VocabularyRepr::deserialize(deserializer)?;
        Vocabulary::from_text(&repr.text).map_err(serde::de::Error::custom)
    }
}

/// Encode each document; out-of-vocabulary n-grams are ignored.
pub fn vectorize_rows(
    docs: &[Vec<String>],
    vocab: &Vocabulary,
    representation: Representation,
) -> Vec<SparseVector> {
    docs.par_iter()
        .map(|d| vocab.encode(d, representation))
        .collect()
}

pub fn vectorize(
    docs: &[Vec<String>],
    labels: &[usize],
    n_classes: usize,
    vocab: &Vocabulary,
    representation: Representation,
) -> Result<FeatureMatrix> {
    FeatureMatrix::new(
        vocab.output_dim(representation),
        n_classes,
        vectorize_rows(docs, vocab, representation),
        labels.to_vec(),
        representation,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ngram_examples() {
        assert_eq!(
            extract_ngrams(&doc(&["a", "b", "c"]), &NGramConfig::new(1, 2).unwrap()),
            doc(&["a", "b", "c", "a b", "b c"])
        );
        assert_eq!(
            extract_ngrams(&doc(&["a"]), &NGramConfig::new(1, 4).unwrap()),
            doc(&["a"])
        );
        assert_eq!(
            extract_ngrams(&doc(&["x", "y", "z", "w"]), &NGramConfig::new(2, 3).unwrap()),
            doc(&["x y", "y z", "z w", "x y z", "y z w"])
        );
    }

    #[test]
    fn ngram_config_bounds() {
        assert!(NGramConfig::new(1, 5).is_err());
        assert!(NGramConfig::new(2, 1).is_err());
        assert!(NGramConfig::new(0, 1).is_err());
    }

    #[test]
    fn vocabulary_examples() {
        let v = fit_vocabulary(&[doc(&["a", "b"]), doc(&["b", "c"])], &NGramConfig::default()).unwrap();
        assert_eq!(v.terms(), &["a", "b", "c"]);
        assert_eq!(v.doc_freq("a"), Some(1));
        assert_eq!(v.doc_freq("b"), Some(2));
        assert_eq!(v.doc_freq("c"), Some(1));
        assert_eq!(v.n_docs(), 2);

        let v = fit_vocabulary(&[doc(&["a", "a", "a"])], &NGramConfig::default()).unwrap();
        assert_eq!(v.doc_freq("a"), Some(1));

        let cfg = NGramConfig { min_df: 2, ..NGramConfig::default() };
        let v = fit_vocabulary(&[doc(&["a"]), doc(&["b"])], &cfg).unwrap();
        assert!(v.is_empty());
        assert_eq!(v.counts(&doc(&["a"])).dim(), 0);

        assert!(fit_vocabulary(&[], &NGramConfig::default()).is_err());
    }

    #[test]
    fn tfidf_hand_arithmetic() {
        let v = fit_vocabulary(&[doc(&["a", "b"]), doc(&["b", "c"])], &NGramConfig::default()).unwrap();
        let idf_a = (3.0f64 / 2.0).ln() + 1.0;
        assert!((v.idf(0) - 1.405_465).abs() < 1e-6);
        assert!((v.idf(1) - 1.0).abs() < 1e-12);
        let row = v.tfidf(&doc(&["a", "b"]));
        let norm = (idf_a * idf_a + 1.0).sqrt();
        assert!((row.get(0) - idf_a / norm).abs() < 1e-12);
        assert!((row.get(1) - 1.0 / norm).abs() < 1e-12);
        assert!((row.get(0) - 0.8148).abs() < 1e-4);
        assert!((row.get(1) - 0.5797).abs() < 1e-4);
    }

    #[test]
    fn counts_and_oov() {
        let v = fit_vocabulary(&[doc(&["a", "b", "c"])], &NGramConfig::default()).unwrap();
        let row = v.counts(&doc(&["b", "b", "c"]));
        assert_eq!(row.indices(), &[1, 2]);
        assert_eq!(row.values(), &[2.0, 1.0]);
        let empty = v.tfidf(&doc(&["zzz"]));
        assert_eq!(empty.nnz(), 0);
        assert_eq!(empty.dim(), 3);
    }

    #[test]
    fn concat_layout() {
        let v = fit_vocabulary(&[doc(&["a", "b"]), doc(&["b"])], &NGramConfig::default()).unwrap();
        let row = v.encode(&doc(&["b", "b"]), Representation::Concat);
        assert_eq!(row.dim(), 4);
        assert_eq!(row.get(1), 2.0);
        assert!((row.get(3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_text_round_trip() {
        let cfg = NGramConfig::new(1, 2).unwrap();
        let v = fit_vocabulary(&[doc(&["x", "y", "z"]), doc(&["y", "z"])], &cfg).unwrap();
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
    }

    #[test]
    fn sparse_interpolation_and_distance() {
        let a = SparseVector::from_pairs(4, [(0, 1.0), (2, 2.0)]).unwrap();
        let b = SparseVector::from_pairs(4, [(2, 2.0), (3, 4.0)]).unwrap();
        assert_eq!(a.squared_distance(&b), 1.0 + 16.0);
        assert_eq!(a.interpolate(&b, 0.0), a);
        let mid = a.interpolate(&b, 0.5);
        assert_eq!(mid.to_dense(), vec![0.5, 0.0, 2.0, 2.0]);
        assert_eq!(SparseVector::from_dense(&[0.0, 3.0, 0.0]).dim(), 3);
    }

    proptest! {
        #[test]
        fn encoding_invariants(docs in proptest::collection::vec(proptest::collection::vec("[a-d]", 0..8), 1..8)) {
            let cfg = NGramConfig::new(1, 2).unwrap();
            let v = fit_vocabulary(&docs, &cfg).unwrap();
            for d in &docs {
                let counts = v.counts(d);
                let total: f64 = counts.values().iter().sum();
                prop_assert_eq!(total as usize, extract_ngrams(d, &cfg).len());
                let t = v.tfidf(d);
                prop_assert!(t.indices().windows(2).all(|w| w[0] < w[1]));
                if t.nnz() > 0 {
                    prop_assert!((t.norm() - 1.0).abs() < 1e-12);
                }
            }
            prop_assert_eq!(extract_ngrams(&docs[0], &NGramConfig::default()), docs[0].clone());
            let forward = vectorize_rows(&docs, &v, Representation::Tfidf);
            let mut rev = docs.clone();
            rev.reverse();
            let mut backward = vectorize_rows(&rev, &v, Representation::Tfidf);
            backward.reverse();
            prop_assert_eq!(forward, backward);
        }
    }
}
