//! Exact greedy decision trees over sparse rows.
//!
//! Columns are presorted once; each node owns the (feature, value, row)
//! entries of its rows, sorted by feature then value, and children receive a
//! stable partition of them. Absent entries are zeros and are handled as one
//! virtual block per feature, so a node costs time linear in its non-zeros.

use std::collections::HashSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::rng::StageRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features considered at each node (`None`: all).
    pub feature_fraction: Option<f64>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            feature_fraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: Vec<f64>) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf `x` falls into.
    pub fn leaf_index(&self, x: &SparseVector) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict(&self, x: &SparseVector) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn map_leaves(&mut self, f: impl Fn(&mut Vec<f64>)) {
        for node in &mut self.nodes {
            if let Node::Leaf { value } = node {
                f(value);
            }
        }
    }
}

/// Node statistics live in flat `[f64]` slices of width [`width`](Self::width).
pub(crate) trait SplitCriterion {
    fn width(&self) -> usize;
    fn add_row(&self, row: usize, stats: &mut [f64]);
    /// Number of rows summarized by `stats`.
    fn count(&self, stats: &[f64]) -> f64;
    /// Split gain is `score(left) + score(right) - score(parent)`.
    fn score(&self, stats: &[f64]) -> f64;
    /// Smallest gain a split must strictly exceed.
    fn min_gain(&self, parent: &[f64]) -> f64;
    fn admissible(&self, _child: &[f64]) -> bool {
        true
    }
    fn leaf_value(&self, stats: &[f64]) -> Vec<f64>;
}

/// Weighted Gini impurity; stats are `[w_0, .., w_{K-1}, count]`.
pub(crate) struct Gini<'a> {
    pub labels: &'a [usize],
    pub weights: &'a [f64],
    pub n_classes: usize,
}

impl Gini<'_> {
    pub fn weighted_impurity(stats: &[f64]) -> f64 {
        let k = stats.len() - 1;
        let total: f64 = stats[..k].iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        total - stats[..k].iter().map(|w| w * w).sum::<f64>() / total
    }
}

impl SplitCriterion for Gini<'_> {
    fn width(&self) -> usize {
        self.n_classes + 1
    }

    fn add_row(&self, row: usize, stats: &mut [f64]) {
        stats[self.labels[row]] += self.weights[row];
        stats[self.n_classes] += 1.0;
    }

    fn count(&self, stats: &[f64]) -> f64 {
        stats[self.n_classes]
    }

    fn score(&self, stats: &[f64]) -> f64 {
        -Gini::weighted_impurity(stats)
    }

    fn min_gain(&self, parent: &[f64]) -> f64 {
        1e-12 * parent[..self.n_classes].iter().sum::<f64>()
    }

    fn leaf_value(&self, stats: &[f64]) -> Vec<f64> {
        let k = self.n_classes;
        let total: f64 = stats[..k].iter().sum();
        if total <= 0.0 {
            return vec![1.0 / k as f64; k];
        }
        stats[..k].iter().map(|w| w / total).collect()
    }
}

/// Second-order boosting objective; stats are `[G, H, count]`.
pub(crate) struct Newton<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl SplitCriterion for Newton<'_> {
    fn width(&self) -> usize {
        3
    }

    fn add_row(&self, row: usize, stats: &mut [f64]) {
        stats[0] += self.grad[row];
        stats[1] += self.hess[row];
        stats[2] += 1.0;
    }

    fn count(&self, stats: &[f64]) -> f64 {
        stats[2]
    }

    fn score(&self, stats: &[f64]) -> f64 {
        let denom = stats[1] + self.lambda;
        if denom <= 0.0 {
            return 0.0;
        }
        0.5 * stats[0] * stats[0] / denom
    }

    fn min_gain(&self, parent: &[f64]) -> f64 {
        self.gamma + 1e-12 * self.score(parent).abs().max(1e-12)
    }

    fn admissible(&self, child: &[f64]) -> bool {
        child[1] >= self.min_child_weight
    }

    fn leaf_value(&self, stats: &[f64]) -> Vec<f64> {
        let denom = stats[1] + self.lambda;
        if denom <= 0.0 {
            return vec![0.0];
        }
        vec![-stats[0] / denom]
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    feature: u32,
    row: u32,
    value: f64,
}

/// Every non-zero of a row set, sorted by (feature, value, row).
pub(crate) struct Presorted {
    entries: Vec<Entry>,
    n_rows: usize,
    dim: usize,
}

impl Presorted {
    pub fn new(rows: &[SparseVector], dim: usize) -> Self {
        let mut entries: Vec<Entry> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, x)| {
                x.iter().map(move |(f, v)| Entry {
                    feature: f as u32,
                    row: r as u32,
                    value: v,
                })
            })
            .collect();
        entries.sort_by(|a, b| {
            a.feature
                .cmp(&b.feature)
                .then(a.value.total_cmp(&b.value))
                .then(a.row.cmp(&b.row))
        });
        Presorted {
            entries,
            n_rows: rows.len(),
            dim,
        }
    }
}

struct Pending {
    slot: usize,
    rows: Vec<u32>,
    entries: Vec<Entry>,
    depth: usize,
}

struct BestSplit {
    gain: f64,
    feature: u32,
    threshold: f64,
}

/// Grow a tree on the given rows (each listed once).
pub(crate) fn grow<C: SplitCriterion>(
    data: &Presorted,
    rows: &[usize],
    criterion: &C,
    params: &TreeParams,
    rng: &mut StageRng,
) -> Tree {
    let width = criterion.width();
    let mut member = vec![false; data.n_rows];
    for &r in rows {
        member[r] = true;
    }
    let root_entries: Vec<Entry> = data
        .entries
        .iter()
        .filter(|e| member[e.row as usize])
        .copied()
        .collect();

    let mut nodes = vec![Node::Leaf { value: Vec::new() }];
    let mut stack = vec![Pending {
        slot: 0,
        rows: rows.iter().map(|&r| r as u32).collect(),
        entries: root_entries,
        depth: 0,
    }];
    let mut goes_left = vec![false; data.n_rows];
    let min_leaf = params.min_samples_leaf.max(1) as f64;

    let mut total = vec![0.0; width];
    let mut nonzero = vec![0.0; width];
    let mut zeros = vec![0.0; width];
    let mut left = vec![0.0; width];
    let mut right = vec![0.0; width];

    while let Some(node) = stack.pop() {
        total.iter_mut().for_each(|x| *x = 0.0);
        for &r in &node.rows {
            criterion.add_row(r as usize, &mut total);
        }
        let n = criterion.count(&total);
        let can_split = params.max_depth.is_none_or(|d| node.depth < d) && n >= 2.0 * min_leaf;
        let best = if can_split {
            let allowed: Option<HashSet<u32>> = params.feature_fraction.map(|frac| {
                let m = ((frac * data.dim as f64).round() as usize).clamp(1, data.dim.max(1));
                sample(rng, data.dim.max(1), m.min(data.dim.max(1)))
                    .into_iter()
                    .map(|f| f as u32)
                    .collect()
            });
            let parent_score = criterion.score(&total);
            let mut best: Option<BestSplit> = None;
            let mut best_gain = criterion.min_gain(&total);

            let entries = &node.entries;
            let mut start = 0;
            while start < entries.len() {
                let feature = entries[start].feature;
                let mut end = start;
                while end < entries.len() && entries[end].feature == feature {
                    end += 1;
                }
                let group = &entries[start..end];
                start = end;
                if allowed.as_ref().is_some_and(|a| !a.contains(&feature)) {
                    continue;
                }
                nonzero.iter_mut().for_each(|x| *x = 0.0);
                for e in group {
                    criterion.add_row(e.row as usize, &mut nonzero);
                }
                for k in 0..width {
                    zeros[k] = total[k] - nonzero[k];
                }
                let mut zero_pending = criterion.count(&zeros) > 0.5;

                left.iter_mut().for_each(|x| *x = 0.0);
                let mut prev: Option<f64> = None;
                let mut idx = 0;
                loop {
                    let next = group.get(idx).map(|e| e.value);
                    let take_zero = zero_pending && next.is_none_or(|v| v > 0.0);
                    let block = if take_zero {
                        0.0
                    } else if let Some(v) = next {
                        v
                    } else {
                        break;
                    };
                    if let Some(p) = prev {
                        for k in 0..width {
                            right[k] = total[k] - left[k];
                        }
                        if criterion.count(&left) >= min_leaf
                            && criterion.count(&right) >= min_leaf
                            && criterion.admissible(&left)
                            && criterion.admissible(&right)
                        {
                            let gain = criterion.score(&left) + criterion.score(&right) - parent_score;
                            if gain > best_gain {
                                let mut threshold = p + (block - p) * 0.5;
                                if !(threshold < block) {
                                    threshold = p;
                                }
                                best_gain = gain;
                                best = Some(BestSplit {
                                    gain,
                                    feature,
                                    threshold,
                                });
                            }
                        }
                    }
                    if take_zero {
                        for k in 0..width {
                            left[k] += zeros[k];
                        }
                        zero_pending = false;
                    } else {
                        while idx < group.len() && group[idx].value == block {
                            criterion.add_row(group[idx].row as usize, &mut left);
                            idx += 1;
                        }
                    }
                    prev = Some(block);
                }
            }
            best
        } else {
            None
        };

        let Some(split) = best else {
            nodes[node.slot] = Node::Leaf {
                value: criterion.leaf_value(&total),
            };
            continue;
        };
        debug_assert!(split.gain > 0.0 || criterion.min_gain(&total) < 0.0);

        let zero_left = 0.0 <= split.threshold;
        for &r in &node.rows {
            goes_left[r as usize] = zero_left;
        }
        let lo = node.entries.partition_point(|e| e.feature < split.feature);
        let hi = node.entries.partition_point(|e| e.feature <= split.feature);
        for e in &node.entries[lo..hi] {
            goes_left[e.row as usize] = e.value <= split.threshold;
        }
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            node.rows.iter().partition(|&&r| goes_left[r as usize]);
        let (left_entries, right_entries): (Vec<Entry>, Vec<Entry>) = node
            .entries
            .into_iter()
            .partition(|e| goes_left[e.row as usize]);

        let left_slot = nodes.len();
        nodes.push(Node::Leaf { value: Vec::new() });
        nodes.push(Node::Leaf { value: Vec::new() });
        nodes[node.slot] = Node::Split {
            feature: split.feature as usize,
            threshold: split.threshold,
            left: left_slot,
            right: left_slot + 1,
        };
        stack.push(Pending {
            slot: left_slot + 1,
            rows: right_rows,
            entries: right_entries,
            depth: node.depth + 1,
        });
        stack.push(Pending {
            slot: left_slot,
            rows: left_rows,
            entries: left_entries,
            depth: node.depth + 1,
        });
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn rows(points: &[&[f64]]) -> Vec<SparseVector> {
        points.iter().map(|p| SparseVector::from_dense(p)).collect()
    }

    fn fit_gini(x: &[SparseVector], y: &[usize], params: &TreeParams) -> Tree {
        let weights = vec![1.0; x.len()];
        let crit = Gini { labels: y, weights: &weights, n_classes: 2 };
        let pre = Presorted::new(x, x[0].dim());
        let all: Vec<usize> = (0..x.len()).collect();
        grow(&pre, &all, &crit, params, &mut rng_from_seed(0))
    }

    #[test]
    fn separates_on_single_feature() {
        let x = rows(&[&[0.0, 1.0], &[0.0, 2.0], &[3.0, 1.0], &[4.0, 2.0]]);
        let y = [0, 0, 1, 1];
        let tree = fit_gini(&x, &y, &TreeParams::default());
        assert_eq!(tree.depth(), 1);
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(tree.predict(xi)[yi], 1.0);
        }
        match &tree.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
            }
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn negative_values_and_zero_block() {
        let x = rows(&[&[-2.0], &[-1.0], &[0.0], &[0.0], &[1.0], &[2.0]]);
        let y = [1, 1, 0, 0, 1, 1];
        let tree = fit_gini(&x, &y, &TreeParams::default());
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(tree.predict(xi)[yi], 1.0, "{xi:?}");
        }
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        let x = rows(&[&[1.0], &[2.0], &[3.0], &[4.0], &[5.0], &[6.0]]);
        let y = [0, 1, 0, 1, 0, 1];
        let stump = fit_gini(&x, &y, &TreeParams { max_depth: Some(1), ..TreeParams::default() });
        assert!(stump.depth() <= 1);
        let fat = fit_gini(&x, &y, &TreeParams { min_samples_leaf: 3, ..TreeParams::default() });
        assert!(fat.depth() <= 1);
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let x = rows(&[&[1.0], &[2.0]]);
        let tree = fit_gini(&x, &[1, 1], &TreeParams::default());
        assert_eq!(tree.nodes().len(), 1);
    }

    #[test]
    fn newton_leaf_weight() {
        let x = rows(&[&[1.0], &[2.0], &[3.0]]);
        let grad = [1.0, -2.0, 0.5];
        let hess = [1.0, 1.0, 1.0];
        let crit = Newton { grad: &grad, hess: &hess, lambda: 1.0, gamma: 0.0, min_child_weight: 0.0 };
        let pre = Presorted::new(&x, 1);
        let tree = grow(&pre, &[0, 1, 2], &crit, &TreeParams { max_depth: Some(0), ..TreeParams::default() }, &mut rng_from_seed(0));
        assert_eq!(tree.predict(&x[0]), &[0.5 / 4.0]);
    }
}
