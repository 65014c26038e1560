use crate::features::SparseVector;

/// Brute-force Euclidean neighbor search over a subset of rows.
///
/// Results are ordered by nondecreasing distance with ties broken by the
/// lower row index.
pub struct NeighborIndex<'a> {
    rows: &'a [SparseVector],
    candidates: Vec<usize>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(rows: &'a [SparseVector], candidates: Vec<usize>) -> Self {
        NeighborIndex { rows, candidates }
    }

    pub fn over_all(rows: &'a [SparseVector]) -> Self {
        NeighborIndex::new(rows, (0..rows.len()).collect())
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// All candidates except `exclude`, sorted by distance to `point`.
    pub fn ranked(&self, point: &SparseVector, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut scored: Vec<(usize, f64)> = self
            .candidates
            .iter()
            .copied()
            .filter(|&c| Some(c) != exclude)
            .map(|c| (c, point.distance(&self.rows[c])))
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        scored
    }

    /// The `k` nearest candidates to row `row`, never including `row` itself.
    pub fn query(&self, row: usize, k: usize) -> Vec<usize> {
        let mut ranked = self.ranked(&self.rows[row], Some(row));
        ranked.truncate(k);
        ranked.into_iter().map(|(i, _)| i).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_orders_by_distance_then_index() {
        let rows: Vec<SparseVector> = [[0.0, 0.0], [0.0, 4.0], [10.0, 10.0], [0.0, -4.0]]
            .iter()
            .map(|p| SparseVector::from_dense(p))
            .collect();
        let index = NeighborIndex::over_all(&rows);
        assert_eq!(index.query(0, 1), vec![1]);
        assert_eq!(index.query(0, 3), vec![1, 3, 2]);
        assert!(!index.query(1, 3).contains(&1));
    }
}
