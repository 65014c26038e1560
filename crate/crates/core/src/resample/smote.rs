use rand::Rng;

use super::{check_oversampling_targets, NeighborIndex, ResamplePlan, Resampled, RowOrigin};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::rng_from_seed;

/// Synthetic minority oversampling.
///
/// Each synthetic row picks a source uniformly from its class, one of the
/// source's `k` nearest same-class neighbors uniformly, and a gap `u` in
/// `[0, 1)`, then emits `x + u * (x_nn - x)`. `k` is clamped to the class
/// size minus one.
pub fn smote(data: &FeatureMatrix, plan: &ResamplePlan) -> Result<Resampled> {
    let counts = data.class_counts();
    let targets = plan.resolve_targets(&counts)?;
    check_oversampling_targets(&counts, &targets)?;
    let mut rng = rng_from_seed(plan.seed);

    let mut rows = data.rows().to_vec();
    let mut labels = data.labels().to_vec();
    let mut origins: Vec<RowOrigin> = (0..data.len()).map(RowOrigin::Original).collect();

    for class in 0..data.n_classes() {
        let extra = targets[class] - counts[class];
        if extra == 0 {
            continue;
        }
        let members = data.rows_of_class(class);
        if members.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "SMOTE needs at least 2 rows in class {class}, found {}",
                members.len()
            )));
        }
        let k = plan.k_neighbors.min(members.len() - 1);
        let index = NeighborIndex::new(data.rows(), members.clone());
        let mut neighbor_cache: Vec<Option<Vec<usize>>> = vec![None; members.len()];

        for _ in 0..extra {
            let slot = rng.gen_range(0..members.len());
            let source = members[slot];
            let neighbors =
                neighbor_cache[slot].get_or_insert_with(|| index.query(source, k));
            let neighbor = neighbors[rng.gen_range(0..neighbors.len())];
            let gap: f64 = rng.gen();
            rows.push(data.rows()[source].interpolate(&data.rows()[neighbor], gap));
            labels.push(class);
            origins.push(RowOrigin::Synthetic {
                source,
                neighbor,
                gap,
            });
        }
    }

    Ok(Resampled {
        data: data.with_rows(rows, labels),
        origins,
    })
}
