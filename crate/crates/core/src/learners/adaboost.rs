use serde::{Deserialize, Serialize};

use super::argmax;
use super::tree::{grow, Gini, Presorted, Tree, TreeParams};
use crate::features::{FeatureMatrix, SparseVector};
use crate::rng::StageRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams {
            n_estimators: 50,
            max_depth: 1,
            learning_rate: 1.0,
        }
    }
}

/// Multiclass AdaBoost (SAMME) over shallow Gini trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    stumps: Vec<Tree>,
    alphas: Vec<f64>,
    /// Weighted training error of each accepted stump.
    errors: Vec<f64>,
    priors: Vec<f64>,
}

impl AdaBoost {
    pub fn fit(params: &AdaBoostParams, data: &FeatureMatrix, rng: &mut StageRng) -> Self {
        let n = data.len();
        let k = data.n_classes();
        let presorted = Presorted::new(data.rows(), data.dim());
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_samples_leaf: 1,
            feature_fraction: None,
        };
        let all: Vec<usize> = (0..n).collect();
        let chance = (k as f64 - 1.0) / k as f64;
        let mut weights = vec![1.0 / n as f64; n];
        let (mut stumps, mut alphas, mut errors) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..params.n_estimators {
            let criterion = Gini {
                labels: data.labels(),
                weights: &weights,
                n_classes: k,
            };
            let stump = grow(&presorted, &all, &criterion, &tree_params, rng);
            let miss: Vec<bool> = data
                .rows()
                .iter()
                .zip(data.labels())
                .map(|(x, &y)| argmax(stump.predict(x)) != y)
                .collect();
            let total: f64 = weights.iter().sum();
            let err = weights.iter().zip(&miss).filter(|(_, &m)| m).map(|(w, _)| w).sum::<f64>() / total;
            if err >= chance {
                break;
            }
            if err <= 0.0 {
                stumps.push(stump);
                alphas.push(1.0);
                errors.push(err);
                break;
            }
            let alpha = params.learning_rate * (((1.0 - err) / err).ln() + (k as f64 - 1.0).ln());
            for (w, &m) in weights.iter_mut().zip(&miss) {
                if m {
                    *w *= alpha.exp();
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            stumps.push(stump);
            alphas.push(alpha);
            errors.push(err);
        }
        let counts = data.class_counts();
        let priors = counts.iter().map(|&c| c as f64 / n as f64).collect();
        AdaBoost {
            stumps,
            alphas,
            errors,
            priors,
        }
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn n_stumps(&self) -> usize {
        self.stumps.len()
    }

    /// Normalized vote shares `sum_m alpha_m [h_m(x) = k] / sum_m alpha_m`.
    pub fn decision(&self, x: &SparseVector) -> Vec<f64> {
        let k = self.priors.len();
        let mut d = vec![0.0; k];
        for (stump, alpha) in self.stumps.iter().zip(&self.alphas) {
            d[argmax(stump.predict(x))] += alpha;
        }
        let total: f64 = self.alphas.iter().sum();
        d.iter_mut().for_each(|v| *v /= total);
        d
    }

    pub fn proba(&self, x: &SparseVector) -> Vec<f64> {
        if self.stumps.is_empty() {
            return self.priors.clone();
        }
        let k = self.priors.len() as f64;
        let mut z: Vec<f64> = self.decision(x).into_iter().map(|d| d / (k - 1.0)).collect();
        super::logreg::softmax_in_place(&mut z);
        z
    }
}
