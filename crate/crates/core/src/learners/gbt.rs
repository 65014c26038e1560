use serde::{Deserialize, Serialize};

use super::logreg::softmax_in_place;
use super::tree::{grow, Newton, Presorted, Tree, TreeParams};
use crate::features::{FeatureMatrix, SparseVector};
use crate::rng::StageRng;

const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    /// Use logistic-loss Hessians; otherwise every row has unit Hessian.
    pub second_order: bool,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams::xgboost()
    }
}

impl GbtParams {
    pub fn xgboost() -> Self {
        GbtParams {
            n_estimators: 100,
            learning_rate: 0.3,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            second_order: true,
        }
    }

    pub fn gradient_boosting() -> Self {
        GbtParams {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            second_order: false,
        }
    }
}

/// Stagewise regression trees on the logistic (softmax) loss. Two-class
/// problems use one tree per round on the logit of class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbt {
    n_classes: usize,
    base_score: Vec<f64>,
    /// Per round, one tree per output; leaf values include shrinkage.
    rounds: Vec<Vec<Tree>>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        z.exp() / (1.0 + z.exp())
    }
}

impl Gbt {
    pub fn fit(params: &GbtParams, data: &FeatureMatrix, rng: &mut StageRng) -> Self {
        let n = data.len();
        let k = data.n_classes();
        let outputs = if k == 2 { 1 } else { k };
        let priors: Vec<f64> = data
            .class_counts()
            .iter()
            .map(|&c| (c as f64 / n as f64).clamp(PRIOR_FLOOR, 1.0 - PRIOR_FLOOR))
            .collect();
        let base_score: Vec<f64> = if k == 2 {
            vec![(priors[1] / priors[0]).ln()]
        } else {
            priors.iter().map(|p| p.ln()).collect()
        };
        let presorted = Presorted::new(data.rows(), data.dim());
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_samples_leaf: 1,
            feature_fraction: None,
        };
        let all: Vec<usize> = (0..n).collect();
        let mut margins: Vec<Vec<f64>> = vec![base_score.clone(); n];
        let mut rounds = Vec::with_capacity(params.n_estimators);
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for _ in 0..params.n_estimators {
            let probs: Vec<Vec<f64>> = margins.iter().map(|m| Self::link(m, k)).collect();
            let mut round = Vec::with_capacity(outputs);
            for out in 0..outputs {
                let class = if k == 2 { 1 } else { out };
                for i in 0..n {
                    let p = probs[i][class];
                    let y = if data.labels()[i] == class { 1.0 } else { 0.0 };
                    grad[i] = p - y;
                    hess[i] = if params.second_order { (p * (1.0 - p)).max(1e-16) } else { 1.0 };
                }
                let criterion = Newton {
                    grad: &grad,
                    hess: &hess,
                    lambda: params.lambda,
                    gamma: params.gamma,
                    min_child_weight: params.min_child_weight,
                };
                let mut tree = grow(&presorted, &all, &criterion, &tree_params, rng);
                let eta = params.learning_rate;
                tree.map_leaves(|v| v.iter_mut().for_each(|w| *w *= eta));
                round.push(tree);
            }
            for (i, m) in margins.iter_mut().enumerate() {
                for (out, tree) in round.iter().enumerate() {
                    m[out] += tree.predict(&data.rows()[i])[0];
                }
            }
            rounds.push(round);
        }
        Gbt {
            n_classes: k,
            base_score,
            rounds,
        }
    }

    fn link(margin: &[f64], k: usize) -> Vec<f64> {
        if k == 2 {
            let p = sigmoid(margin[0]);
            vec![1.0 - p, p]
        } else {
            let mut z = margin.to_vec();
            softmax_in_place(&mut z);
            z
        }
    }

    pub fn margin(&self, x: &SparseVector) -> Vec<f64> {
        let mut m = self.base_score.clone();
        for round in &self.rounds {
            for (out, tree) in round.iter().enumerate() {
                m[out] += tree.predict(x)[0];
            }
        }
        m
    }

    pub fn proba(&self, x: &SparseVector) -> Vec<f64> {
        Self::link(&self.margin(x), self.n_classes)
    }
}
