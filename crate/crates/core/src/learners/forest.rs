//! Random forests: bootstrap-sampled CART trees with per-split feature
//! subsampling, plus split-usage counts for feature-importance reporting.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on, DecisionTree, TreeTask};
use super::DesignMatrix;
use crate::rng::RngSeed;

/// Feature-subsampling rule applied at every split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mtry {
    /// ⌈√p⌉ features per split (the usual forest default).
    Sqrt,
    /// All features at every split.
    All,
    /// A fixed count, clamped to the feature count.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mtry: Mtry,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> RfParams {
        RfParams { n_trees: 100, max_depth: 12, min_leaf: 2, mtry: Mtry::Sqrt, bootstrap: true }
    }
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub task: TreeTask,
    pub trees: Vec<DecisionTree>,
    /// Split-usage count per feature, summed over all trees.
    pub split_counts: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl RandomForest {
    /// Mean prediction (regression) or positive-class probability
    /// (classification).
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        s / self.trees.len() as f64
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Majority-vote class for classification forests.
    pub fn predict_class(&self, row: &[f64]) -> bool {
        self.predict_row(row) >= 0.5
    }

    /// Number of distinct features the forest actually splits on.
    pub fn features_used(&self) -> usize {
        self.split_counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Fits a random forest; deterministic given the seed.
pub fn fit_rf(x: &DesignMatrix, task: TreeTask, params: RfParams, seed: RngSeed) -> RandomForest {
    let n = x.n_rows();
    let p = x.n_features();
    let mtry = match params.mtry {
        Mtry::Sqrt => Some(((p as f64).sqrt().ceil() as usize).clamp(1, p.max(1))),
        Mtry::All => None,
        Mtry::Fixed(k) => Some(k.clamp(1, p.max(1))),
    };
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut split_counts = vec![0usize; p];
    for t in 0..params.n_trees {
        let mut rng: ChaCha8Rng = seed.derive_index(t as u64).rng();
        let idx: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let tree =
            fit_tree_on(x, &idx, task, params.max_depth, params.min_leaf, mtry, Some(&mut rng));
        for (c, u) in split_counts.iter_mut().zip(tree.split_usage(p)) {
            *c += u;
        }
        trees.push(tree);
    }
    RandomForest { task, trees, split_counts, feature_names: x.feature_names.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit_tree;
    use rand::Rng;

    fn design(rows: Vec<Vec<f64>>, target: Vec<f64>) -> DesignMatrix {
        let p = rows.first().map_or(0, |r| r.len());
        let names = (0..p).map(|i| format!("x{i}")).collect();
        DesignMatrix::new(names, rows, target).unwrap()
    }

    #[test]
    fn single_tree_without_randomness_matches_fit_tree() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let target: Vec<f64> = (0..30).map(|i| (i * i) as f64).collect();
        let x = design(rows.clone(), target);
        let params = RfParams {
            n_trees: 1,
            max_depth: 4,
            min_leaf: 2,
            mtry: Mtry::All,
            bootstrap: false,
        };
        let forest = fit_rf(&x, TreeTask::Regression, params, RngSeed(1));
        let tree = fit_tree(&x, TreeTask::Regression, 4, 2);
        for row in &rows {
            assert_eq!(forest.predict_row(row), tree.predict_row(row));
        }
    }

    #[test]
    fn separable_data_high_holdout_accuracy() {
        // classes separated by a margin on the first feature; the second is noise
        let mut rng = RngSeed(42).rng();
        let mut rows = Vec::new();
        let mut target = Vec::new();
        for _ in 0..200 {
            let sign = if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { -1.0 };
            let a: f64 = sign * rng.random_range(0.1..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            rows.push(vec![a, b]);
            target.push(if a > 0.0 { 1.0 } else { 0.0 });
        }
        let x = design(rows[..150].to_vec(), target[..150].to_vec());
        let forest = fit_rf(&x, TreeTask::Classification, RfParams { n_trees: 50, ..RfParams::default() }, RngSeed(7));
        let correct = rows[150..]
            .iter()
            .zip(&target[150..])
            .filter(|(r, &y)| (forest.predict_class(r) as u8 as f64) == y)
            .count();
        assert!(correct >= 48, "holdout accuracy {correct}/50");
    }

    #[test]
    fn identical_seeds_identical_forests() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let target: Vec<f64> = (0..50).map(|i| (i % 3) as f64).collect();
        let x = design(rows, target);
        let a = fit_rf(&x, TreeTask::Regression, RfParams::default(), RngSeed(99));
        let b = fit_rf(&x, TreeTask::Regression, RfParams::default(), RngSeed(99));
        assert_eq!(a, b);
    }

    #[test]
    fn regression_predictions_within_target_range() {
        let mut rng = RngSeed(5).rng();
        let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random_range(0.0..10.0)]).collect();
        let target: Vec<f64> = rows.iter().map(|r| r[0] * 3.0 + rng.random_range(-1.0..1.0)).collect();
        let lo = target.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = target.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let x = design(rows, target);
        let forest = fit_rf(&x, TreeTask::Regression, RfParams::default(), RngSeed(3));
        for v in forest.predict(&(0..50).map(|i| vec![i as f64 * 0.2]).collect::<Vec<_>>()) {
            assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn split_counts_ignore_useless_features() {
        let mut rng = RngSeed(8).rng();
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|i| vec![i as f64, rng.random_range(-0.001..0.001)])
            .collect();
        let target: Vec<f64> = (0..120).map(|i| (i / 20) as f64).collect();
        let x = design(rows, target);
        let forest = fit_rf(
            &x,
            TreeTask::Regression,
            RfParams { mtry: Mtry::All, ..RfParams::default() },
            RngSeed(4),
        );
        assert!(forest.split_counts[0] > forest.split_counts[1]);
        assert!(forest.features_used() >= 1);
    }
}
