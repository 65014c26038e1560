use serde::{Deserialize, Serialize};

use crate::features::{FeatureMatrix, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            l2: 1e-4,
            learning_rate: 1.0,
            epochs: 300,
        }
    }
}

/// Softmax regression trained by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    /// Row-major `n_classes x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    dim: usize,
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn logits(weights: &[f64], bias: &[f64], dim: usize, x: &SparseVector) -> Vec<f64> {
    bias.iter()
        .enumerate()
        .map(|(c, b)| b + x.dot_dense(&weights[c * dim..(c + 1) * dim]))
        .collect()
}

/// Gradient of [`loss_and_gradient`] with respect to weights and bias.
pub struct Gradient {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Mean cross-entropy plus `l2 / 2 * ||W||^2` (bias unpenalized).
pub fn loss_and_gradient(
    weights: &[f64],
    bias: &[f64],
    rows: &[SparseVector],
    labels: &[usize],
    l2: f64,
) -> Gradient {
    let k = bias.len();
    let dim = weights.len() / k;
    let n = rows.len().max(1) as f64;
    let mut grad_w: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_b = vec![0.0; k];
    let mut loss = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (x, &y) in rows.iter().zip(labels) {
        let mut p = logits(weights, bias, dim, x);
        let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + p.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += (log_norm - p[y]) / n;
        softmax_in_place(&mut p);
        for c in 0..k {
            let d = (p[c] - if c == y { 1.0 } else { 0.0 }) / n;
            grad_b[c] += d;
            for (j, v) in x.iter() {
                grad_w[c * dim + j] += d * v;
            }
        }
    }
    Gradient {
        loss,
        weights: grad_w,
        bias: grad_b,
    }
}

impl LogReg {
    /// The step size is divided by the largest squared row norm (when above
    /// one) so that unnormalized count features do not diverge.
    pub fn fit(params: &LogRegParams, data: &FeatureMatrix) -> Self {
        let (k, dim) = (data.n_classes(), data.dim());
        let mut weights = vec![0.0; k * dim];
        let mut bias = vec![0.0; k];
        let max_sq = data
            .rows()
            .iter()
            .map(|x| x.norm().powi(2))
            .fold(1.0, f64::max);
        let step = params.learning_rate / max_sq;
        for _ in 0..params.epochs {
            let g = loss_and_gradient(&weights, &bias, data.rows(), data.labels(), params.l2);
            for (w, d) in weights.iter_mut().zip(&g.weights) {
                *w -= step * d;
            }
            for (b, d) in bias.iter_mut().zip(&g.bias) {
                *b -= step * d;
            }
        }
        LogReg { weights, bias, dim }
    }

    pub fn from_parts(weights: Vec<f64>, bias: Vec<f64>) -> Self {
        let dim = weights.len() / bias.len().max(1);
        LogReg { weights, bias, dim }
    }

    pub fn logits(&self, x: &SparseVector) -> Vec<f64> {
        logits(&self.weights, &self.bias, self.dim, x)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}
