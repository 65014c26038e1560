//! Text-level and vector-level training-set enhancement.

use std::collections::BTreeMap;

use crate::augment::{generate_to_targets, AugmentConfig, NeighborSource};
use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::resample::{oversample_dataset, resample, Method, ResamplePlan};

use super::config::{ClassEnhancement, EnhancementConfig, EnhancementMethod, TextPlan};

/// Per-class text-level methods after resolving against the class counts.
pub fn resolve_text_plan(plan: &TextPlan, train: &Dataset) -> BTreeMap<Label, ClassEnhancement> {
    let counts = train.class_counts();
    let majority = counts.values().copied().max().unwrap_or(0);
    match plan {
        TextPlan::AllMinority(m) => counts
            .iter()
            .filter(|(_, &c)| c < majority)
            .map(|(&l, _)| (l, *m))
            .collect(),
        TextPlan::PerClass(map) => map.clone(),
    }
}

/// Apply the text-level part of `enhancement`: listed classes are raised to
/// the majority training count by duplication (ROS) and/or paraphrase
/// synthesis. Vector-level methods leave the data untouched.
///
/// `neighbors` is only called when some class needs synthesis.
pub fn build_enhanced_dataset<S, F>(
    train: &Dataset,
    enhancement: &EnhancementConfig,
    augment: &AugmentConfig,
    seed: u64,
    neighbors: F,
) -> Result<Dataset>
where
    S: NeighborSource,
    F: FnOnce() -> Result<S>,
{
    let Some(plan) = enhancement.class_plan(train.task())? else {
        return Ok(train.clone());
    };
    let per_class = resolve_text_plan(&plan, train);
    let counts = train.class_counts();
    let majority = counts.values().copied().max().unwrap_or(0);
    let targets = |kind: ClassEnhancement| -> BTreeMap<Label, usize> {
        per_class
            .iter()
            .filter(|(_, &m)| m == kind)
            .map(|(&l, _)| (l, majority))
            .collect()
    };
    let ros = targets(ClassEnhancement::Ros);
    let synth = targets(ClassEnhancement::Synthetic);
    if let Some((l, _)) = per_class.iter().find(|(l, _)| counts[l] == 0) {
        return Err(Error::Validation(format!("cannot enhance class {l}: it has no training examples")));
    }
    let mut data = if ros.is_empty() {
        train.clone()
    } else {
        oversample_dataset(train, &ros, seed)?
    };
    if !synth.is_empty() {
        let source = neighbors()?;
        let config = AugmentConfig { seed, ..*augment };
        data = generate_to_targets(&data, &source, &config, &synth)?;
    }
    Ok(data)
}

/// Apply the vector-level part of `enhancement` (ROS, RUS, SMOTE, NearMiss).
pub fn resample_matrix(data: FeatureMatrix, enhancement: &EnhancementConfig, seed: u64) -> Result<FeatureMatrix> {
    let method = match enhancement.method() {
        EnhancementMethod::Ros => Method::Ros,
        EnhancementMethod::Rus => Method::Rus,
        EnhancementMethod::Smote => Method::Smote,
        EnhancementMethod::Nearmiss1 => Method::NearMiss1,
        EnhancementMethod::Nearmiss2 => Method::NearMiss2,
        EnhancementMethod::Nearmiss3 => Method::NearMiss3,
        _ => return Ok(data),
    };
    let plan = ResamplePlan {
        method,
        k_neighbors: enhancement.0.k_neighbors,
        n_ref: enhancement.0.n_ref,
        seed,
        targets: None,
    };
    Ok(resample(&data, &plan)?.data)
}
