//! Newton-boosted trees with pluggable objectives.
//!
//! Each round fits one regression tree per output dimension to the pseudo
//! response −g/h and then rewrites the leaf values to the Newton step
//! −Σg/(Σh + λ). A round that fails to decrease the training loss is
//! reverted and boosting stops, so the loss trace is non-increasing by
//! construction.

use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_parts, DecisionTree, TreeTask};
use super::DesignMatrix;
use crate::error::{Error, Result};

/// Floor applied to every hessian entry; keeps Newton steps finite when an
/// objective's curvature vanishes or turns negative.
pub const HESSIAN_FLOOR: f64 = 1e-6;

/// A differentiable training objective over raw per-sample scores.
///
/// `dims` is 1 for regression and binary classification; the softmax
/// weighted-error objective scores every model of an M-member pool at once.
pub trait Objective {
    fn dims(&self) -> usize;
    fn n_samples(&self) -> usize;
    /// Total training loss at the given scores (`scores[i]` has `dims` entries).
    fn loss(&self, scores: &[Vec<f64>]) -> f64;
    /// Per-sample gradient and (floored) diagonal hessian at the given scores.
    fn grad_hess(&self, scores: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>);
    /// Initial raw score shared by all samples.
    fn base_score(&self) -> Vec<f64> {
        vec![0.0; self.dims()]
    }
}

/// Squared-error regression: loss ½(s − y)².
#[derive(Debug, Clone)]
pub struct SquaredError {
    pub targets: Vec<f64>,
}

impl Objective for SquaredError {
    fn dims(&self) -> usize {
        1
    }

    fn n_samples(&self) -> usize {
        self.targets.len()
    }

    fn loss(&self, scores: &[Vec<f64>]) -> f64 {
        scores
            .iter()
            .zip(&self.targets)
            .map(|(s, &y)| 0.5 * (s[0] - y) * (s[0] - y))
            .sum()
    }

    fn grad_hess(&self, scores: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let g = scores.iter().zip(&self.targets).map(|(s, &y)| vec![s[0] - y]).collect();
        let h = vec![vec![1.0]; self.targets.len()];
        (g, h)
    }

    fn base_score(&self) -> Vec<f64> {
        vec![self.targets.iter().sum::<f64>() / self.targets.len().max(1) as f64]
    }
}

fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Binary log-loss over 0/1 labels; scores are logits.
#[derive(Debug, Clone)]
pub struct Logistic {
    pub labels: Vec<f64>,
}

impl Objective for Logistic {
    fn dims(&self) -> usize {
        1
    }

    fn n_samples(&self) -> usize {
        self.labels.len()
    }

    fn loss(&self, scores: &[Vec<f64>]) -> f64 {
        scores
            .iter()
            .zip(&self.labels)
            .map(|(s, &y)| {
                let p = sigmoid(s[0]).clamp(1e-12, 1.0 - 1e-12);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum()
    }

    fn grad_hess(&self, scores: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut g = Vec::with_capacity(self.labels.len());
        let mut h = Vec::with_capacity(self.labels.len());
        for (s, &y) in scores.iter().zip(&self.labels) {
            let p = sigmoid(s[0]);
            g.push(vec![p - y]);
            h.push(vec![(p * (1.0 - p)).max(HESSIAN_FLOOR)]);
        }
        (g, h)
    }

    fn base_score(&self) -> Vec<f64> {
        let p = (self.labels.iter().sum::<f64>() / self.labels.len().max(1) as f64)
            .clamp(1e-6, 1.0 - 1e-6);
        vec![(p / (1.0 - p)).ln()]
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Softmax-weighted forecast error: per sample, loss = Σ_m p_m·e_m where
/// p = softmax(scores) and e_m are precomputed per-model errors. The
/// gradient is p_m(e_m − ℓ); the diagonal hessian p_m(1 − 2p_m)(e_m − ℓ) is
/// floored since it is not positive definite.
#[derive(Debug, Clone)]
pub struct SoftmaxWeightedError {
    /// `errors[i][m]` = error of pool model `m` on sample `i`.
    pub errors: Vec<Vec<f64>>,
}

impl Objective for SoftmaxWeightedError {
    fn dims(&self) -> usize {
        self.errors.first().map_or(0, |e| e.len())
    }

    fn n_samples(&self) -> usize {
        self.errors.len()
    }

    fn loss(&self, scores: &[Vec<f64>]) -> f64 {
        scores
            .iter()
            .zip(&self.errors)
            .map(|(s, e)| {
                let p = softmax(s);
                p.iter().zip(e).map(|(&pm, &em)| pm * em).sum::<f64>()
            })
            .sum()
    }

    fn grad_hess(&self, scores: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut g = Vec::with_capacity(self.errors.len());
        let mut h = Vec::with_capacity(self.errors.len());
        for (s, e) in scores.iter().zip(&self.errors) {
            let p = softmax(s);
            let ell: f64 = p.iter().zip(e).map(|(&pm, &em)| pm * em).sum();
            let gi: Vec<f64> = p.iter().zip(e).map(|(&pm, &em)| pm * (em - ell)).collect();
            let hi: Vec<f64> = p
                .iter()
                .zip(e)
                .map(|(&pm, &em)| (pm * (1.0 - 2.0 * pm) * (em - ell)).max(HESSIAN_FLOOR))
                .collect();
            g.push(gi);
            h.push(hi);
        }
        (g, h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> GbtParams {
        GbtParams { n_rounds: 200, learning_rate: 0.1, max_depth: 3, lambda: 1.0, min_leaf: 5 }
    }
}

/// A fitted boosted model: per round, one tree per output dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub dims: usize,
    pub base: Vec<f64>,
    pub learning_rate: f64,
    pub rounds: Vec<Vec<DecisionTree>>,
    /// Training-loss trace, one entry per accepted round (starts with the
    /// base-score loss).
    pub loss_trace: Vec<f64>,
}

impl GbtModel {
    /// Raw scores for one feature row.
    pub fn predict_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = self.base.clone();
        for round in &self.rounds {
            for (d, tree) in round.iter().enumerate() {
                s[d] += self.learning_rate * tree.predict_row(row);
            }
        }
        s
    }

    /// Regression value (dimension 0).
    pub fn predict_value(&self, row: &[f64]) -> f64 {
        self.predict_scores(row)[0]
    }

    /// Positive-class probability for the logistic objective.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.predict_scores(row)[0])
    }

    /// Softmax weights over the pool for the weighted-error objective.
    pub fn predict_weights(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.predict_scores(row))
    }
}

/// Fits a Newton-boosted tree model. The design matrix supplies feature
/// rows; targets live inside the objective.
pub fn fit_gbt<O: Objective>(x: &DesignMatrix, objective: &O, params: GbtParams) -> Result<GbtModel> {
    let n = x.n_rows();
    let dims = objective.dims();
    if n == 0 || dims == 0 {
        return Err(Error::InvalidArgument("boosting needs samples and output dimensions".into()));
    }
    if objective.n_samples() != n {
        return Err(Error::InvalidArgument(format!(
            "objective covers {} samples but design matrix has {n}",
            objective.n_samples()
        )));
    }
    let base = objective.base_score();
    let mut scores: Vec<Vec<f64>> = vec![base.clone(); n];
    let mut model = GbtModel {
        dims,
        base,
        learning_rate: params.learning_rate,
        rounds: Vec::new(),
        loss_trace: vec![objective.loss(&scores)],
    };
    let idx: Vec<usize> = (0..n).collect();
    for _ in 0..params.n_rounds {
        let (g, h) = objective.grad_hess(&scores);
        let mut round_trees = Vec::with_capacity(dims);
        let mut new_scores = scores.clone();
        for d in 0..dims {
            let pseudo: Vec<f64> = (0..n).map(|i| -g[i][d] / h[i][d]).collect();
            let mut tree = fit_tree_parts(
                &x.rows,
                &pseudo,
                x.n_features(),
                &idx,
                TreeTask::Regression,
                params.max_depth,
                params.min_leaf,
                None,
                None,
            );
            tree.rewrite_leaves(&x.rows, |members| {
                if members.is_empty() {
                    return 0.0;
                }
                let gs: f64 = members.iter().map(|&i| g[i][d]).sum();
                let hs: f64 = members.iter().map(|&i| h[i][d]).sum();
                -gs / (hs + params.lambda)
            });
            for (i, s) in new_scores.iter_mut().enumerate() {
                s[d] += params.learning_rate * tree.predict_row(&x.rows[i]);
            }
            round_trees.push(tree);
        }
        let new_loss = objective.loss(&new_scores);
        let prev_loss = *model.loss_trace.last().unwrap();
        if new_loss.is_nan() || new_loss > prev_loss + 1e-12 {
            break; // reverted: the Newton step stopped helping
        }
        scores = new_scores;
        model.rounds.push(round_trees);
        model.loss_trace.push(new_loss);
    }
    Ok(model)
}
