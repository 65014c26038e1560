use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureMatrix, SparseVector};
use crate::rng::StageRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub calibrate: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 20,
            calibrate: true,
        }
    }
}

/// Sigmoid `1 / (1 + exp(a * s + b))` mapping a decision score to a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn apply(&self, score: f64) -> f64 {
        let z = self.a * score + self.b;
        if z >= 0.0 {
            (-z).exp() / (1.0 + (-z).exp())
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    /// Newton's method with backtracking on the regularized targets of Platt (1999).
    pub fn fit(scores: &[f64], positive: &[bool]) -> Platt {
        let n_pos = positive.iter().filter(|&&p| p).count() as f64;
        let n_neg = positive.len() as f64 - n_pos;
        let hi = (n_pos + 1.0) / (n_pos + 2.0);
        let lo = 1.0 / (n_neg + 2.0);
        let targets: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();
        let objective = |a: f64, b: f64| -> f64 {
            scores
                .iter()
                .zip(&targets)
                .map(|(&s, &t)| {
                    let z = a * s + b;
                    if z >= 0.0 {
                        t * z + (1.0 + (-z).exp()).ln()
                    } else {
                        (t - 1.0) * z + (1.0 + z.exp()).ln()
                    }
                })
                .sum()
        };
        let mut a = 0.0;
        let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
        let mut f = objective(a, b);
        for _ in 0..100 {
            let (mut g1, mut g2, mut h11, mut h22, mut h21) = (0.0, 0.0, 1e-12, 1e-12, 0.0);
            for (&s, &t) in scores.iter().zip(&targets) {
                let p = Platt { a, b }.apply(s);
                let d1 = t - p;
                let d2 = p * (1.0 - p);
                g1 += s * d1;
                g2 += d1;
                h11 += s * s * d2;
                h22 += d2;
                h21 += s * d2;
            }
            if g1.abs() < 1e-10 && g2.abs() < 1e-10 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let mut step = 1.0;
            let mut improved = false;
            while step >= 1e-10 {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < f + 1e-4 * step * (g1 * da + g2 * db) {
                    a = na;
                    b = nb;
                    f = nf;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Platt { a, b }
    }
}

/// One-vs-rest linear SVM trained by stochastic subgradient descent on the
/// hinge loss, with optional per-class sigmoid calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// Row-major `n_classes x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    dim: usize,
    calibration: Option<Vec<Platt>>,
}

fn train_binary(rows: &[SparseVector], positive: &[bool], dim: usize, params: &SvmParams, rng: &mut StageRng) -> (Vec<f64>, f64) {
    let n = rows.len();
    let lambda = 1.0 / (params.c * n as f64);
    let eta0 = 0.1;
    let mut v = vec![0.0; dim];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0.0;
    for _ in 0..params.epochs {
        order.shuffle(rng);
        for &i in &order {
            let eta = eta0 / (1.0 + eta0 * lambda * t);
            t += 1.0;
            let y = if positive[i] { 1.0 } else { -1.0 };
            let margin = y * (scale * rows[i].dot_dense(&v) + bias);
            scale *= 1.0 - eta * lambda;
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
            if margin < 1.0 {
                for (j, x) in rows[i].iter() {
                    v[j] += eta * y * x / scale;
                }
                bias += eta * y;
            }
        }
    }
    v.iter_mut().for_each(|w| *w *= scale);
    (v, bias)
}

impl LinearSvm {
    pub fn fit(params: &SvmParams, data: &FeatureMatrix, rng: &mut StageRng) -> Self {
        let (k, dim) = (data.n_classes(), data.dim());
        let mut weights = Vec::with_capacity(k * dim);
        let mut bias = Vec::with_capacity(k);
        let mut calibration = Vec::with_capacity(k);
        for c in 0..k {
            let positive: Vec<bool> = data.labels().iter().map(|&y| y == c).collect();
            let (w, b) = train_binary(data.rows(), &positive, dim, params, rng);
            if params.calibrate {
                let scores: Vec<f64> = data.rows().iter().map(|x| x.dot_dense(&w) + b).collect();
                calibration.push(Platt::fit(&scores, &positive));
            }
            weights.extend(w);
            bias.push(b);
        }
        LinearSvm {
            weights,
            bias,
            dim,
            calibration: params.calibrate.then_some(calibration),
        }
    }

    pub fn decision(&self, x: &SparseVector) -> Vec<f64> {
        self.bias
            .iter()
            .enumerate()
            .map(|(c, b)| b + x.dot_dense(&self.weights[c * self.dim..(c + 1) * self.dim]))
            .collect()
    }

    /// Calibrated per-class probabilities renormalized over classes, or a
    /// softmax of decision scores when calibration is off.
    pub fn proba(&self, x: &SparseVector) -> Vec<f64> {
        let mut scores = self.decision(x);
        match &self.calibration {
            Some(platt) => {
                for (s, p) in scores.iter_mut().zip(platt) {
                    *s = p.apply(*s);
                }
                scores
            }
            None => {
                super::logreg::softmax_in_place(&mut scores);
                scores
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn platt_orders_scores() {
        let scores = [-2.0, -1.5, -1.0, -0.2, 0.3, 1.0, 1.4, 2.0];
        let pos = [false, false, false, true, false, true, true, true];
        let p = Platt::fit(&scores, &pos);
        assert!(p.a < 0.0);
        assert!(p.apply(2.0) > 0.5 && p.apply(-2.0) < 0.5);
    }
}
