//! Class rebalancing over vectorized data: random over/undersampling, SMOTE
//! and the three NearMiss variants.
//!
//! Every method returns the resampled matrix together with the origin of
//! each output row, so callers can audit what was duplicated, dropped or
//! synthesized.

mod nearmiss;
mod neighbors;
mod smote;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{derived_id, Dataset, Example, Label, Tweet};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::{rng_from_seed, StageRng};

pub use nearmiss::{near_miss, NearMissVariant};
pub use neighbors::NeighborIndex;
pub use smote::smote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    None,
    Ros,
    Rus,
    Smote,
    #[serde(rename = "nearmiss1")]
    NearMiss1,
    #[serde(rename = "nearmiss2")]
    NearMiss2,
    #[serde(rename = "nearmiss3")]
    NearMiss3,
}

impl Method {
    pub fn is_undersampling(self) -> bool {
        matches!(
            self,
            Method::Rus | Method::NearMiss1 | Method::NearMiss2 | Method::NearMiss3
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResamplePlan {
    pub method: Method,
    /// SMOTE neighborhood size.
    pub k_neighbors: usize,
    /// NearMiss reference count.
    pub n_ref: usize,
    pub seed: u64,
    /// Desired count per class index. `None` balances every class to the
    /// majority count (oversampling) or the minority count (undersampling).
    pub targets: Option<BTreeMap<usize, usize>>,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        ResamplePlan {
            method: Method::None,
            k_neighbors: 5,
            n_ref: 3,
            seed: 0,
            targets: None,
        }
    }
}

impl ResamplePlan {
    pub fn new(method: Method, seed: u64) -> Self {
        ResamplePlan {
            method,
            seed,
            ..ResamplePlan::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(Error::Config("k_neighbors must be at least 1".into()));
        }
        if self.n_ref < 1 {
            return Err(Error::Config("n_ref must be at least 1".into()));
        }
        Ok(())
    }

    /// Resolved target count for every class.
    pub fn resolve_targets(&self, counts: &[usize]) -> Result<Vec<usize>> {
        match &self.targets {
            Some(map) => {
                let mut targets = counts.to_vec();
                for (&class, &t) in map {
                    if class >= counts.len() {
                        return Err(Error::Config(format!(
                            "target for class {class} but only {} classes",
                            counts.len()
                        )));
                    }
                    targets[class] = t;
                }
                Ok(targets)
            }
            None => Ok(default_targets(counts, self.method.is_undersampling())),
        }
    }
}

/// Balance to the largest class, or to the smallest non-empty class when
/// undersampling. Empty classes stay empty.
pub fn default_targets(counts: &[usize], undersample: bool) -> Vec<usize> {
    let present = counts.iter().copied().filter(|&c| c > 0);
    let level = if undersample {
        present.min().unwrap_or(0)
    } else {
        present.max().unwrap_or(0)
    };
    counts
        .iter()
        .map(|&c| if c == 0 { 0 } else { level })
        .collect()
}

/// Where a resampled row came from (indices refer to the input matrix).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowOrigin {
    Original(usize),
    Duplicate(usize),
    Synthetic {
        source: usize,
        neighbor: usize,
        gap: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub data: FeatureMatrix,
    pub origins: Vec<RowOrigin>,
}

impl Resampled {
    pub(crate) fn identity(data: &FeatureMatrix) -> Self {
        Resampled {
            origins: (0..data.len()).map(RowOrigin::Original).collect(),
            data: data.clone(),
        }
    }

    pub(crate) fn from_kept(data: &FeatureMatrix, keep: &[bool]) -> Self {
        let kept: Vec<usize> = (0..data.len()).filter(|&i| keep[i]).collect();
        Resampled {
            data: data.select(&kept),
            origins: kept.into_iter().map(RowOrigin::Original).collect(),
        }
    }
}

/// Apply whichever method the plan names.
pub fn resample(data: &FeatureMatrix, plan: &ResamplePlan) -> Result<Resampled> {
    plan.validate()?;
    match plan.method {
        Method::None => Ok(Resampled::identity(data)),
        Method::Ros => random_oversample(data, plan),
        Method::Rus => random_undersample(data, plan),
        Method::Smote => smote(data, plan),
        Method::NearMiss1 => near_miss(data, plan, NearMissVariant::One),
        Method::NearMiss2 => near_miss(data, plan, NearMissVariant::Two),
        Method::NearMiss3 => near_miss(data, plan, NearMissVariant::Three),
    }
}

pub(crate) fn check_oversampling_targets(counts: &[usize], targets: &[usize]) -> Result<()> {
    for (class, (&c, &t)) in counts.iter().zip(targets).enumerate() {
        if t < c {
            return Err(Error::InvalidInput(format!(
                "oversampling target {t} for class {class} is below its count {c}"
            )));
        }
        if c == 0 && t > 0 {
            return Err(Error::InvalidInput(format!(
                "class {class} is empty but has target {t}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_undersampling_targets(counts: &[usize], targets: &[usize]) -> Result<()> {
    for (class, (&c, &t)) in counts.iter().zip(targets).enumerate() {
        if t > c {
            return Err(Error::InvalidInput(format!(
                "undersampling target {t} for class {class} exceeds its count {c}"
            )));
        }
    }
    Ok(())
}

/// `extra` uniform draws with replacement from `pool`.
fn draw_with_replacement(pool: &[usize], extra: usize, rng: &mut StageRng) -> Vec<usize> {
    (0..extra).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
}

pub fn random_oversample(data: &FeatureMatrix, plan: &ResamplePlan) -> Result<Resampled> {
    let counts = data.class_counts();
    let targets = plan.resolve_targets(&counts)?;
    check_oversampling_targets(&counts, &targets)?;
    let mut rng = rng_from_seed(plan.seed);
    let mut origins: Vec<RowOrigin> = (0..data.len()).map(RowOrigin::Original).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for class in 0..data.n_classes() {
        let extra = targets[class] - counts[class];
        if extra == 0 {
            continue;
        }
        let pool = data.rows_of_class(class);
        for src in draw_with_replacement(&pool, extra, &mut rng) {
            order.push(src);
            origins.push(RowOrigin::Duplicate(src));
        }
    }
    Ok(Resampled {
        data: data.select(&order),
        origins,
    })
}

pub fn random_undersample(data: &FeatureMatrix, plan: &ResamplePlan) -> Result<Resampled> {
    let counts = data.class_counts();
    let targets = plan.resolve_targets(&counts)?;
    check_undersampling_targets(&counts, &targets)?;
    let mut rng = rng_from_seed(plan.seed);
    let mut keep = vec![true; data.len()];
    for class in 0..data.n_classes() {
        if targets[class] == counts[class] {
            continue;
        }
        let pool = data.rows_of_class(class);
        let survivors = sample(&mut rng, pool.len(), targets[class]);
        for &i in &pool {
            keep[i] = false;
        }
        for s in survivors.iter() {
            keep[pool[s]] = true;
        }
    }
    Ok(Resampled::from_kept(data, &keep))
}

/// Random oversampling at the text level: duplicated tweets get derived ids
/// and `Duplicate` provenance. Classes not in `targets` are left alone.
pub fn oversample_dataset(
    dataset: &Dataset,
    targets: &BTreeMap<Label, usize>,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let counts = dataset.class_counts();
    let mut examples: Vec<Example> = dataset.examples().to_vec();
    for (&label, &target) in targets {
        let have = counts.get(&label).copied().unwrap_or(0);
        check_oversampling_targets(&[have], &[target])?;
        let pool: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.examples()[i].label == label)
            .collect();
        for (n, src) in draw_with_replacement(&pool, target - have, &mut rng)
            .into_iter()
            .enumerate()
        {
            let original = &dataset.examples()[src];
            let tweet = Tweet {
                id: derived_id(&original.tweet.id, false, n),
                raw_text: original.tweet.raw_text.clone(),
                tokens: original.tweet.tokens.clone(),
            };
            examples.push(Example::new(tweet, label));
        }
    }
    Dataset::new(dataset.task(), examples)
}
