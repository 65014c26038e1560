use super::{check_undersampling_targets, ResamplePlan, Resampled};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NearMissVariant {
    /// Keep rows whose mean distance to their closest reference rows is smallest.
    One,
    /// Keep rows whose mean distance to their farthest reference rows is smallest.
    Two,
    /// Pool the nearest rows of every reference row, then keep the pooled rows
    /// whose mean distance to their closest reference rows is largest.
    Three,
}

/// Mean of the `n` smallest (or largest) values, summed in ascending order.
fn mean_of_extreme(mut dists: Vec<f64>, n: usize, largest: bool) -> f64 {
    dists.sort_by(f64::total_cmp);
    let chosen = if largest {
        &dists[dists.len() - n..]
    } else {
        &dists[..n]
    };
    chosen.iter().sum::<f64>() / n as f64
}

/// NearMiss undersampling. The reference ("minority") set for a class being
/// reduced is the union of every strictly smaller class, or every other class
/// when none is smaller. `n_ref` is clamped to the reference set size.
pub fn near_miss(
    data: &FeatureMatrix,
    plan: &ResamplePlan,
    variant: NearMissVariant,
) -> Result<Resampled> {
    let counts = data.class_counts();
    let targets = plan.resolve_targets(&counts)?;
    check_undersampling_targets(&counts, &targets)?;
    let rows = data.rows();
    let mut keep = vec![true; data.len()];

    for class in 0..data.n_classes() {
        let target = targets[class];
        if target == counts[class] {
            continue;
        }
        let majority = data.rows_of_class(class);
        let mut reference: Vec<usize> = (0..data.len())
            .filter(|&i| counts[data.labels()[i]] < counts[class])
            .collect();
        if reference.is_empty() {
            reference = (0..data.len()).filter(|&i| data.labels()[i] != class).collect();
        }
        if reference.is_empty() {
            return Err(Error::InvalidInput(format!(
                "NearMiss on class {class}: no minority rows to compare against"
            )));
        }
        let n_ref = plan.n_ref.min(reference.len());

        // distances[m][r]: majority row m to reference row r
        let distances: Vec<Vec<f64>> = majority
            .iter()
            .map(|&m| reference.iter().map(|&r| rows[m].distance(&rows[r])).collect())
            .collect();
        let closest_mean: Vec<f64> = distances
            .iter()
            .map(|d| mean_of_extreme(d.clone(), n_ref, false))
            .collect();

        let selected: Vec<usize> = match variant {
            NearMissVariant::One | NearMissVariant::Two => {
                let scores: Vec<f64> = match variant {
                    NearMissVariant::One => closest_mean,
                    _ => distances
                        .iter()
                        .map(|d| mean_of_extreme(d.clone(), n_ref, true))
                        .collect(),
                };
                let mut order: Vec<usize> = (0..majority.len()).collect();
                order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
                order.truncate(target);
                order
            }
            NearMissVariant::Three => {
                let per_ref = n_ref.min(majority.len());
                let mut pooled = vec![false; majority.len()];
                for r in 0..reference.len() {
                    let mut by_dist: Vec<usize> = (0..majority.len()).collect();
                    by_dist.sort_by(|&a, &b| {
                        distances[a][r].total_cmp(&distances[b][r]).then(a.cmp(&b))
                    });
                    for &m in &by_dist[..per_ref] {
                        pooled[m] = true;
                    }
                }
                let mut order: Vec<usize> = (0..majority.len()).collect();
                // pooled rows first, then farthest-first, then index
                order.sort_by(|&a, &b| {
                    pooled[b]
                        .cmp(&pooled[a])
                        .then(closest_mean[b].total_cmp(&closest_mean[a]))
                        .then(a.cmp(&b))
                });
                order.truncate(target);
                order
            }
        };

        for &m in &majority {
            keep[m] = false;
        }
        for s in selected {
            keep[majority[s]] = true;
        }
    }
    Ok(Resampled::from_kept(data, &keep))
}
