//! Hard voting, soft voting and probability averaging over fitted members.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::learners::{argmax, normalize, FittedModel, ProbabilisticClassifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMode {
    Hard,
    Soft,
    Average,
}

/// Anything that maps an input of type `I` to a class distribution.
pub trait Scorer<I: ?Sized> {
    fn n_classes(&self) -> usize;

    fn proba(&self, input: &I) -> Result<Vec<f64>>;

    fn label(&self, input: &I) -> Result<usize> {
        Ok(argmax(&self.proba(input)?))
    }
}

impl Scorer<SparseVector> for FittedModel {
    fn n_classes(&self) -> usize {
        ProbabilisticClassifier::n_classes(self)
    }

    fn proba(&self, input: &SparseVector) -> Result<Vec<f64>> {
        self.predict_proba(input)
    }
}

/// Modal label, lowest index on ties.
pub fn hard_vote(labels: &[usize], n_classes: usize) -> Result<usize> {
    weighted_hard_vote(labels, None, n_classes).map(|v| argmax(&v))
}

fn weighted_hard_vote(labels: &[usize], weights: Option<&[f64]>, n_classes: usize) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("no votes to count".into()));
    }
    check_weights(weights, labels.len())?;
    let mut tally = vec![0.0; n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::InvalidInput(format!("vote {l} out of range for {n_classes} classes")));
        }
        tally[l] += weights.map_or(1.0, |w| w[i]);
    }
    Ok(tally)
}

fn check_weights(weights: Option<&[f64]>, n: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::InvalidInput(format!("{} weights for {n} members", w.len())));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
    }
    Ok(())
}

/// Weighted elementwise sum of member distributions.
pub fn weighted_sum(distributions: &[Vec<f64>], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let Some(first) = distributions.first() else {
        return Err(Error::InvalidInput("no distributions to combine".into()));
    };
    check_weights(weights, distributions.len())?;
    let mut sum = vec![0.0; first.len()];
    for (i, d) in distributions.iter().enumerate() {
        if d.len() != sum.len() {
            return Err(Error::DimensionMismatch {
                expected: sum.len(),
                actual: d.len(),
            });
        }
        let w = weights.map_or(1.0, |w| w[i]);
        for (acc, v) in sum.iter_mut().zip(d) {
            *acc += w * v;
        }
    }
    Ok(sum)
}

/// Argmax of the weighted sum, lowest index on ties.
pub fn soft_vote(distributions: &[Vec<f64>], weights: Option<&[f64]>) -> Result<usize> {
    weighted_sum(distributions, weights).map(|s| argmax(&s))
}

/// Unweighted arithmetic mean of member distributions.
pub fn average_proba(distributions: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = distributions.len() as f64;
    let mut mean = weighted_sum(distributions, None)?;
    mean.iter_mut().for_each(|v| *v /= n);
    Ok(mean)
}

/// An immutable combination of members that all score the same input type.
#[derive(Debug, Clone)]
pub struct Ensemble<M> {
    members: Vec<M>,
    mode: VoteMode,
    weights: Option<Vec<f64>>,
}

impl<M> Ensemble<M> {
    pub fn new(members: Vec<M>, mode: VoteMode, weights: Option<Vec<f64>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("an ensemble needs at least one member".into()));
        }
        check_weights(weights.as_deref(), members.len()).map_err(|e| Error::Config(e.to_string()))?;
        if mode == VoteMode::Average && weights.is_some() {
            return Err(Error::Config("average mode takes no weights".into()));
        }
        Ok(Ensemble {
            members,
            mode,
            weights,
        })
    }

    pub fn members(&self) -> &[M] {
        &self.members
    }

    pub fn mode(&self) -> VoteMode {
        self.mode
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

impl<I, M> Scorer<I> for Ensemble<M>
where
    I: ?Sized + Sync,
    M: Scorer<I> + Sync,
{
    fn n_classes(&self) -> usize {
        self.members[0].n_classes()
    }

    /// Hard mode yields normalized vote shares; soft mode the normalized
    /// weighted sum; average mode the plain mean.
    fn proba(&self, input: &I) -> Result<Vec<f64>> {
        let dists: Vec<Vec<f64>> = self
            .members
            .par_iter()
            .map(|m| m.proba(input))
            .collect::<Result<_>>()?;
        let combined = match self.mode {
            VoteMode::Hard => {
                let labels: Vec<usize> = dists.iter().map(|d| argmax(d)).collect();
                weighted_hard_vote(&labels, self.weights.as_deref(), dists[0].len())?
            }
            VoteMode::Soft => weighted_sum(&dists, self.weights.as_deref())?,
            VoteMode::Average => average_proba(&dists)?,
        };
        Ok(normalize(combined))
    }
}
