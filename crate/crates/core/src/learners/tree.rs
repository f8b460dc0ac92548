//! CART-style decision trees: greedy variance (regression) or Gini
//! (classification) splits, arena-stored nodes so boosting can rewrite leaf
//! values after the structure is grown.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DesignMatrix;

/// What the tree predicts: a conditional mean or a positive-class fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeTask {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
}

/// A fitted tree; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub task: TreeTask,
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Index of the leaf a row is routed to.
    pub fn leaf_for(&self, row: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }

    /// Leaf value for a row (mean for regression, positive fraction for
    /// classification).
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_for(row)] {
            Node::Leaf { value } => *value,
            Node::Split { .. } => unreachable!("leaf_for returns a leaf"),
        }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Features used by internal splits, as a usage count per feature index.
    pub fn split_usage(&self, n_features: usize) -> Vec<usize> {
        let mut counts = vec![0usize; n_features];
        for node in &self.nodes {
            if let Node::Split { feature, .. } = node {
                counts[*feature] += 1;
            }
        }
        counts
    }

    /// Replaces every leaf value via `f(samples routed to that leaf)`;
    /// used by Newton boosting to install −ΣG/(ΣH+λ) values.
    pub fn rewrite_leaves(&mut self, rows: &[Vec<f64>], f: impl Fn(&[usize]) -> f64) {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, row) in rows.iter().enumerate() {
            members[self.leaf_for(row)].push(i);
        }
        for (node, m) in self.nodes.iter_mut().zip(&members) {
            if let Node::Leaf { value } = node {
                *value = f(m);
            }
        }
    }
}

/// Impurity of a target subset: variance or Gini, chosen by task.
fn impurity(task: TreeTask, sum: f64, sum_sq: f64, n: f64) -> f64 {
    match task {
        TreeTask::Regression => {
            let mean = sum / n;
            (sum_sq / n - mean * mean).max(0.0)
        }
        TreeTask::Classification => {
            let p = sum / n; // targets are 0/1, sum counts positives
            2.0 * p * (1.0 - p)
        }
    }
}

struct Grower<'a> {
    rows: &'a [Vec<f64>],
    target: &'a [f64],
    n_features: usize,
    task: TreeTask,
    max_depth: usize,
    min_leaf: usize,
    mtry: Option<usize>,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.target[i]).sum::<f64>() / idx.len() as f64
    }

    /// Best split of `idx` over the allowed features: (feature, threshold,
    /// left indices, right indices). Ties go to the lower feature index and
    /// lower threshold, keeping growth deterministic.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64, Vec<usize>, Vec<usize>)> {
        let p = self.n_features;
        let feature_pool: Vec<usize> = match (self.mtry, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut chosen: Vec<usize> = sample(rng, p, m).into_iter().collect();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..p).collect(),
        };
        let n = idx.len() as f64;
        let total_sum: f64 = idx.iter().map(|&i| self.target[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.target[i] * self.target[i]).sum();
        let parent = impurity(self.task, total_sum, total_sq, n);
        if parent <= 1e-12 {
            return None;
        }
        let mut best: Option<(f64, usize, f64)> = None; // (score, feature, threshold)
        for &f in &feature_pool {
            let mut order: Vec<usize> = idx.to_vec();
            order.sort_by(|&a, &b| {
                self.rows[a][f]
                    .partial_cmp(&self.rows[b][f])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for cut in 1..order.len() {
                let prev = self.rows[order[cut - 1]][f];
                let here = self.rows[order[cut]][f];
                let y = self.target[order[cut - 1]];
                left_sum += y;
                left_sq += y * y;
                if prev == here {
                    continue;
                }
                if cut < self.min_leaf || order.len() - cut < self.min_leaf {
                    continue;
                }
                let nl = cut as f64;
                let nr = n - nl;
                let child = (nl * impurity(self.task, left_sum, left_sq, nl)
                    + nr * impurity(self.task, total_sum - left_sum, total_sq - left_sq, nr))
                    / n;
                let gain = parent - child;
                if gain < 0.0 {
                    continue;
                }
                let threshold = 0.5 * (prev + here);
                if best.is_none_or(|(bg, bf, bt)| {
                    gain > bg + 1e-15 || ((gain - bg).abs() <= 1e-15 && (f, threshold) < (bf, bt))
                }) {
                    best = Some((gain, f, threshold));
                }
            }
        }
        let (_, f, threshold) = best?;
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &i in idx {
            if self.rows[i][f] <= threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        Some((f, threshold, left, right))
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> u32 {
        let make_leaf = depth >= self.max_depth || idx.len() < 2 * self.min_leaf;
        if !make_leaf {
            if let Some((feature, threshold, left_idx, right_idx)) = self.best_split(idx) {
                let at = self.nodes.len();
                self.nodes.push(Node::Leaf { value: 0.0 }); // placeholder
                let left = self.grow(&left_idx, depth + 1);
                let right = self.grow(&right_idx, depth + 1);
                self.nodes[at] = Node::Split { feature, threshold, left, right };
                return at as u32;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf_value(idx) });
        at as u32
    }
}

/// Grows a tree on explicit rows and targets; the boosting entry point,
/// where targets are per-round pseudo-residuals.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_tree_parts(
    rows: &[Vec<f64>],
    target: &[f64],
    n_features: usize,
    idx: &[usize],
    task: TreeTask,
    max_depth: usize,
    min_leaf: usize,
    mtry: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> DecisionTree {
    let mut grower =
        Grower { rows, target, n_features, task, max_depth, min_leaf, mtry, rng, nodes: Vec::new() };
    if idx.is_empty() {
        grower.nodes.push(Node::Leaf { value: 0.0 });
    } else {
        grower.grow(idx, 0);
    }
    DecisionTree { task, nodes: grower.nodes }
}

/// Grows a tree on a row subset with optional per-split feature subsampling
/// (`mtry` features drawn from `rng`); the forest entry point.
pub(crate) fn fit_tree_on(
    x: &DesignMatrix,
    idx: &[usize],
    task: TreeTask,
    max_depth: usize,
    min_leaf: usize,
    mtry: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> DecisionTree {
    fit_tree_parts(&x.rows, &x.target, x.n_features(), idx, task, max_depth, min_leaf, mtry, rng)
}

/// Fits a CART tree on the full design matrix.
pub fn fit_tree(x: &DesignMatrix, task: TreeTask, max_depth: usize, min_leaf: usize) -> DecisionTree {
    let idx: Vec<usize> = (0..x.n_rows()).collect();
    fit_tree_on(x, &idx, task, max_depth, min_leaf, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(rows: Vec<Vec<f64>>, target: Vec<f64>) -> DesignMatrix {
        let p = rows.first().map_or(0, |r| r.len());
        let names = (0..p).map(|i| format!("x{i}")).collect();
        DesignMatrix::new(names, rows, target).unwrap()
    }

    #[test]
    fn separable_data_perfect_accuracy() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let target: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
        let x = design(rows.clone(), target.clone());
        let tree = fit_tree(&x, TreeTask::Classification, 4, 1);
        for (row, &y) in rows.iter().zip(&target) {
            let pred = if tree.predict_row(row) >= 0.5 { 1.0 } else { 0.0 };
            assert_eq!(pred, y);
        }
    }

    #[test]
    fn constant_target_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let tree = fit_tree(&design(rows, vec![7.0; 10]), TreeTask::Regression, 5, 1);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_row(&[3.0]), 7.0);
    }

    #[test]
    fn xor_solved_at_depth_two() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let target = vec![0.0, 1.0, 1.0, 0.0];
        let x = design(rows.clone(), target.clone());
        let tree = fit_tree(&x, TreeTask::Classification, 2, 1);
        for (row, &y) in rows.iter().zip(&target) {
            let pred = if tree.predict_row(row) >= 0.5 { 1.0 } else { 0.0 };
            assert_eq!(pred, y, "row {row:?}");
        }
    }

    #[test]
    fn split_usage_counts_features() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64, 0.0]) // second feature is useless
            .collect();
        let target: Vec<f64> = (0..40).map(|i| i as f64 * 2.0).collect();
        let x = design(rows, target);
        let tree = fit_tree(&x, TreeTask::Regression, 3, 2);
        let usage = tree.split_usage(2);
        assert!(usage[0] >= 1);
        assert_eq!(usage[1], 0);
    }

    #[test]
    fn min_leaf_respected() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let target: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let tree = fit_tree(&design(rows.clone(), target), TreeTask::Regression, 10, 4);
        // count members per leaf
        let mut counts = std::collections::HashMap::new();
        for row in &rows {
            *counts.entry(tree.leaf_for(row)).or_insert(0usize) += 1;
        }
        assert!(counts.values().all(|&c| c >= 4));
    }
}
