use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SparseVector};

/// Log prior given to classes absent from the training data.
pub(crate) const ABSENT_LOG_PRIOR: f64 = -1e300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveBayesParams {
    pub alpha: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams { alpha: 1.0 }
    }
}

/// Multinomial naive Bayes with additive smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    log_prior: Vec<f64>,
    /// Row-major `n_classes x dim`.
    log_prob: Vec<f64>,
    dim: usize,
}

impl NaiveBayes {
    pub fn fit(params: &NaiveBayesParams, data: &FeatureMatrix) -> Result<Self> {
        let (k, dim) = (data.n_classes(), data.dim());
        let mut sums = vec![0.0; k * dim];
        for (row, &label) in data.rows().iter().zip(data.labels()) {
            for (j, v) in row.iter() {
                if v < 0.0 {
                    return Err(Error::InvalidInput(
                        "naive Bayes requires non-negative features".into(),
                    ));
                }
                sums[label * dim + j] += v;
            }
        }
        let counts = data.class_counts();
        let n = data.len() as f64;
        let log_prior = counts
            .iter()
            .map(|&c| if c == 0 { ABSENT_LOG_PRIOR } else { (c as f64 / n).ln() })
            .collect();
        let mut log_prob = vec![0.0; k * dim];
        for c in 0..k {
            let class = &sums[c * dim..(c + 1) * dim];
            let total: f64 = class.iter().sum::<f64>() + params.alpha * dim as f64;
            for j in 0..dim {
                log_prob[c * dim + j] = ((class[j] + params.alpha) / total).ln();
            }
        }
        Ok(NaiveBayes { log_prior, log_prob, dim })
    }

    /// Joint log-likelihood per class.
    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        self.log_prior
            .iter()
            .enumerate()
            .map(|(c, prior)| prior + x.dot_dense(&self.log_prob[c * self.dim..(c + 1) * self.dim]))
            .collect()
    }
}
