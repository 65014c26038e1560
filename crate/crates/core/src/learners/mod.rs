//! Probabilistic multiclass classifiers over sparse feature rows.

mod adaboost;
mod forest;
mod gbt;
mod logreg;
mod naive_bayes;
mod svm;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use adaboost::{AdaBoost, AdaBoostParams};
pub use forest::{Forest, ForestParams};
pub use gbt::{Gbt, GbtParams};
pub use logreg::{loss_and_gradient, Gradient, LogReg, LogRegParams};
pub use naive_bayes::{NaiveBayes, NaiveBayesParams};
pub use svm::{LinearSvm, Platt, SvmParams};
pub use tree::{Tree, TreeParams};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SparseVector};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    /// Always predicts the most frequent training class.
    Majority,
    NaiveBayes(NaiveBayesParams),
    Logreg(LogRegParams),
    LinearSvm(SvmParams),
    Tree(TreeParams),
    RandomForest(ForestParams),
    Bagging(ForestParams),
    Adaboost(AdaBoostParams),
    Gbt(GbtParams),
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")))
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")))
    }
}

fn check_estimators(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("n_estimators must be at least 1".into()));
    }
    Ok(())
}

impl LearnerConfig {
    /// Short upper-case tag used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            LearnerConfig::Majority => "MAJORITY",
            LearnerConfig::NaiveBayes(_) => "NB",
            LearnerConfig::Logreg(_) => "LOGREG",
            LearnerConfig::LinearSvm(_) => "LINSVM",
            LearnerConfig::Tree(_) => "TREE",
            LearnerConfig::RandomForest(_) => "RANDOM_FOREST",
            LearnerConfig::Bagging(_) => "BAGGING",
            LearnerConfig::Adaboost(_) => "ADABOOST",
            LearnerConfig::Gbt(_) => "GBT",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tree = |p: &TreeParams| -> Result<()> {
            if p.min_samples_leaf == 0 {
                return Err(Error::Config("min_samples_leaf must be at least 1".into()));
            }
            if let Some(f) = p.feature_fraction {
                check_fraction("feature_fraction", f)?;
            }
            Ok(())
        };
        match self {
            LearnerConfig::Majority => Ok(()),
            LearnerConfig::NaiveBayes(p) => {
                check_rate("alpha", p.alpha)?;
                if p.alpha == 0.0 {
                    return Err(Error::Config("alpha must be positive".into()));
                }
                Ok(())
            }
            LearnerConfig::Logreg(p) => {
                check_rate("l2", p.l2)?;
                check_rate("learning_rate", p.learning_rate)
            }
            LearnerConfig::LinearSvm(p) => {
                check_rate("c", p.c)?;
                if p.c == 0.0 {
                    return Err(Error::Config("c must be positive".into()));
                }
                Ok(())
            }
            LearnerConfig::Tree(p) => tree(p),
            LearnerConfig::RandomForest(p) | LearnerConfig::Bagging(p) => {
                check_estimators(p.n_estimators)?;
                check_fraction("subsample", p.subsample)?;
                tree(&TreeParams {
                    max_depth: p.max_depth,
                    min_samples_leaf: p.min_samples_leaf,
                    feature_fraction: p.feature_fraction,
                })
            }
            LearnerConfig::Adaboost(p) => {
                check_estimators(p.n_estimators)?;
                check_rate("learning_rate", p.learning_rate)?;
                if p.max_depth == 0 {
                    return Err(Error::Config("max_depth must be at least 1".into()));
                }
                Ok(())
            }
            LearnerConfig::Gbt(p) => {
                check_rate("learning_rate", p.learning_rate)?;
                check_rate("lambda", p.lambda)?;
                check_rate("gamma", p.gamma)?;
                check_rate("min_child_weight", p.min_child_weight)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Model {
    Majority { class: usize },
    NaiveBayes(NaiveBayes),
    Logreg(LogReg),
    LinearSvm(LinearSvm),
    Tree(Tree),
    Forest(Forest),
    Adaboost(AdaBoost),
    Gbt(Gbt),
}

pub trait ProbabilisticClassifier {
    fn n_classes(&self) -> usize;

    fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>>;

    /// Argmax of [`predict_proba`](Self::predict_proba), lowest index on ties.
    fn predict(&self, x: &SparseVector) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    fn predict_proba_batch(&self, rows: &[SparseVector]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|x| self.predict_proba(x)).collect()
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Clamp to non-negative finite values and rescale to sum to one; degenerate
/// inputs become uniform.
pub fn normalize(mut p: Vec<f64>) -> Vec<f64> {
    for v in p.iter_mut() {
        if !v.is_finite() || *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = p.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        p.iter_mut().for_each(|v| *v /= sum);
    } else {
        let u = 1.0 / p.len() as f64;
        p.iter_mut().for_each(|v| *v = u);
    }
    p
}

/// A trained classifier together with its configuration and input contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    config: LearnerConfig,
    seed: u64,
    n_classes: usize,
    dim: usize,
    model: Model,
}

/// Train `config` on `data`. The same inputs always yield the same model.
pub fn fit(config: &LearnerConfig, data: &FeatureMatrix, seed: u64) -> Result<FittedModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("training data is empty".into()));
    }
    let counts = data.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Validation(
            "training data must contain at least two classes".into(),
        ));
    }
    if let Some(i) = data.rows().iter().position(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("row {i} has non-finite feature values")));
    }
    let mut rng = rng_from_seed(seed);
    let model = match config {
        LearnerConfig::Majority => Model::Majority {
            class: argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>()),
        },
        LearnerConfig::NaiveBayes(p) => Model::NaiveBayes(NaiveBayes::fit(p, data)?),
        LearnerConfig::Logreg(p) => Model::Logreg(LogReg::fit(p, data)),
        LearnerConfig::LinearSvm(p) => Model::LinearSvm(LinearSvm::fit(p, data, &mut rng)),
        LearnerConfig::Tree(p) => {
            let weights = vec![1.0; data.len()];
            let criterion = tree::Gini {
                labels: data.labels(),
                weights: &weights,
                n_classes: data.n_classes(),
            };
            let presorted = tree::Presorted::new(data.rows(), data.dim());
            let all: Vec<usize> = (0..data.len()).collect();
            Model::Tree(tree::grow(&presorted, &all, &criterion, p, &mut rng))
        }
        LearnerConfig::RandomForest(p) => Model::Forest(Forest::fit(p, true, data, &mut rng)),
        LearnerConfig::Bagging(p) => Model::Forest(Forest::fit(p, false, data, &mut rng)),
        LearnerConfig::Adaboost(p) => Model::Adaboost(AdaBoost::fit(p, data, &mut rng)),
        LearnerConfig::Gbt(p) => Model::Gbt(Gbt::fit(p, data, &mut rng)),
    };
    Ok(FittedModel {
        config: config.clone(),
        seed,
        n_classes: data.n_classes(),
        dim: data.dim(),
        model,
    })
}

impl FittedModel {
    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl ProbabilisticClassifier for FittedModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        let raw = match &self.model {
            Model::Majority { class } => {
                let mut p = vec![0.0; self.n_classes];
                p[*class] = 1.0;
                p
            }
            Model::NaiveBayes(m) => {
                let mut s = m.scores(x);
                logreg::softmax_in_place(&mut s);
                s
            }
            Model::Logreg(m) => {
                let mut s = m.logits(x);
                logreg::softmax_in_place(&mut s);
                s
            }
            Model::LinearSvm(m) => m.proba(x),
            Model::Tree(t) => t.predict(x).to_vec(),
            Model::Forest(f) => f.proba(x, self.n_classes),
            Model::Adaboost(a) => a.proba(x),
            Model::Gbt(g) => g.proba(x),
        };
        Ok(normalize(raw))
    }
}
