use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Gini, Presorted, Tree, TreeParams};
use crate::features::{FeatureMatrix, SparseVector};
use crate::rng::StageRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// Bootstrap sample size as a fraction of the training rows.
    pub subsample: f64,
    /// Features tried per split; `None` means `sqrt(dim)` for random forests
    /// and all features for bagging.
    pub feature_fraction: Option<f64>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            subsample: 1.0,
            feature_fraction: None,
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

/// Bootstrap-aggregated Gini trees; leaf class distributions are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(params: &ForestParams, random_features: bool, data: &FeatureMatrix, rng: &mut StageRng) -> Self {
        let n = data.len();
        let dim = data.dim().max(1);
        let feature_fraction = match params.feature_fraction {
            Some(f) => Some(f),
            None if random_features => Some((dim as f64).sqrt().max(1.0) / dim as f64),
            None => None,
        };
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            feature_fraction,
        };
        let presorted = Presorted::new(data.rows(), data.dim());
        let draws = ((params.subsample * n as f64).round() as usize).max(1);
        let mut trees = Vec::with_capacity(params.n_estimators);
        for _ in 0..params.n_estimators {
            let mut weights = vec![0.0; n];
            for _ in 0..draws {
                weights[rng.gen_range(0..n)] += 1.0;
            }
            let active: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
            let criterion = Gini {
                labels: data.labels(),
                weights: &weights,
                n_classes: data.n_classes(),
            };
            trees.push(grow(&presorted, &active, &criterion, &tree_params, rng));
        }
        Forest { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn proba(&self, x: &SparseVector, n_classes: usize) -> Vec<f64> {
        let mut p = vec![0.0; n_classes];
        for tree in &self.trees {
            for (acc, v) in p.iter_mut().zip(tree.predict(x)) {
                *acc += v;
            }
        }
        let m = self.trees.len().max(1) as f64;
        p.iter_mut().for_each(|v| *v /= m);
        p
    }
}
