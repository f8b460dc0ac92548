//! Meta-learning over experiment results: one binary classifier per
//! ensemble+HP predicts "select" from a series' meta-features. Labels come
//! from per-dataset ranks (1 iff rank ≤ K), classes are balanced by random
//! oversampling, and selections are evaluated as (K, N, R) curves against
//! autorank and random baselines.

use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_rf, DesignMatrix, RandomForest, RfParams, TreeTask};
use crate::meta_features::{MetaFeatureVector, FEATURE_SET_VERSION};
use crate::metrics::{rank_results, RankTable};
use crate::rng::RngSeed;
use crate::store::ResultRecord;

/// Minimum row count for selector training.
pub const MIN_META_ROWS: usize = 20;

/// One row per series: meta-features plus a binary target per ensemble+HP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    pub feature_version: String,
    /// Flattened feature column names (value + defined-flag pairs).
    pub feature_names: Vec<String>,
    pub series_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Canonical ensemble+HP identifiers, sorted.
    pub algo_ids: Vec<String>,
    /// `targets[row][algo]` ∈ {0, 1}.
    pub targets: Vec<Vec<u8>>,
    /// Mean rank per algorithm over this corpus (autorank/fallback source).
    pub mean_ranks: Vec<f64>,
    /// Label-time rank cutoff.
    pub k: usize,
}

/// Label threshold on one dataset: the K-th smallest rank value, so every
/// algorithm tied at the boundary is labeled 1.
fn rank_cutoff(ranks: &[f64], k: usize) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted[k.min(sorted.len()) - 1]
}

/// Builds the meta-dataset from ranked results and per-series features.
/// Every dataset must carry a result for every algorithm in the grid.
pub fn build_meta_dataset(
    records: &[ResultRecord],
    features: &BTreeMap<String, MetaFeatureVector>,
    k: usize,
) -> Result<MetaDataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be ≥ 1".into()));
    }
    let table = rank_results(records)?;
    if table.algorithms.is_empty() || table.datasets.is_empty() {
        return Err(Error::IncompleteGrid("no ranked results".into()));
    }
    let mut series_ids = Vec::with_capacity(table.datasets.len());
    let mut rows = Vec::with_capacity(table.datasets.len());
    let mut targets = Vec::with_capacity(table.datasets.len());
    for (d, dataset) in table.datasets.iter().enumerate() {
        let ranks: Vec<f64> = table.ranks[d]
            .iter()
            .enumerate()
            .map(|(a, r)| {
                r.ok_or_else(|| {
                    Error::IncompleteGrid(format!(
                        "dataset `{dataset}` has no ranked result for `{}`",
                        table.algorithms[a]
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let vector = features.get(dataset).ok_or_else(|| {
            Error::InvalidArgument(format!("no meta-features for dataset `{dataset}`"))
        })?;
        let cutoff = rank_cutoff(&ranks, k);
        targets.push(ranks.iter().map(|&r| u8::from(r <= cutoff)).collect());
        rows.push(vector.to_row());
        series_ids.push(dataset.clone());
    }
    let mean_ranks = table
        .mean_ranks
        .iter()
        .map(|r| r.expect("every algorithm ranked somewhere"))
        .collect();
    Ok(MetaDataset {
        feature_version: FEATURE_SET_VERSION.to_string(),
        feature_names: MetaFeatureVector::row_header(),
        series_ids,
        rows,
        algo_ids: table.algorithms,
        targets,
        mean_ranks,
        k,
    })
}

/// Balanced row indices: all originals plus uniformly re-drawn minority
/// rows until both classes count the same. Single-class columns are left
/// unbalanced with a warning.
pub fn oversample_balance(targets: &[u8], seed: RngSeed) -> Vec<usize> {
    use rand::Rng;
    let positives: Vec<usize> =
        targets.iter().enumerate().filter(|(_, &t)| t == 1).map(|(i, _)| i).collect();
    let negatives: Vec<usize> =
        targets.iter().enumerate().filter(|(_, &t)| t != 1).map(|(i, _)| i).collect();
    let mut indices: Vec<usize> = (0..targets.len()).collect();
    if positives.is_empty() || negatives.is_empty() {
        warn!("single-class target column; skipping oversampling");
        return indices;
    }
    let (minority, deficit) = if positives.len() < negatives.len() {
        (&positives, negatives.len() - positives.len())
    } else {
        (&negatives, positives.len() - negatives.len())
    };
    let mut rng = seed.rng();
    for _ in 0..deficit {
        indices.push(minority[rng.random_range(0..minority.len())]);
    }
    indices
}

/// The fitted decision rule of one ensemble+HP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selector {
    Forest(RandomForest),
    /// Degenerate single-class column: always answer this class.
    Constant(u8),
}

/// One classifier per ensemble+HP plus everything selection needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorModel {
    pub feature_version: String,
    pub feature_names: Vec<String>,
    pub k: usize,
    pub algo_ids: Vec<String>,
    pub selectors: Vec<Selector>,
    pub corpus_mean_ranks: Vec<f64>,
}

impl SelectorModel {
    /// Total split-usage count per feature across all forest selectors, for
    /// the feature-importance report.
    pub fn feature_usage(&self) -> Vec<(String, usize)> {
        let mut counts = vec![0usize; self.feature_names.len()];
        for s in &self.selectors {
            if let Selector::Forest(f) = s {
                for (c, &u) in counts.iter_mut().zip(&f.split_counts) {
                    *c += u;
                }
            }
        }
        self.feature_names.iter().cloned().zip(counts).collect()
    }
}

/// Trains one random-forest classifier per ensemble+HP on the oversampled
/// rows. Deterministic given the seed.
pub fn train_selectors(meta: &MetaDataset, seed: RngSeed) -> Result<SelectorModel> {
    if meta.rows.len() < MIN_META_ROWS {
        return Err(Error::TooFewRows { got: meta.rows.len(), need: MIN_META_ROWS });
    }
    let params = RfParams { n_trees: 100, max_depth: 12, ..RfParams::default() };
    let mut selectors = Vec::with_capacity(meta.algo_ids.len());
    for (j, algo) in meta.algo_ids.iter().enumerate() {
        let column: Vec<u8> = meta.targets.iter().map(|t| t[j]).collect();
        if column.iter().all(|&t| t == column[0]) {
            warn!("target for `{algo}` is single-class; selector is constant {}", column[0]);
            selectors.push(Selector::Constant(column[0]));
            continue;
        }
        let algo_seed = seed.derive(algo);
        let indices = oversample_balance(&column, algo_seed.derive("oversample"));
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| meta.rows[i].clone()).collect();
        let target: Vec<f64> = indices.iter().map(|&i| f64::from(column[i])).collect();
        let design = DesignMatrix::new(meta.feature_names.clone(), rows, target)?;
        let forest = fit_rf(&design, TreeTask::Classification, params, algo_seed);
        selectors.push(Selector::Forest(forest));
    }
    Ok(SelectorModel {
        feature_version: meta.feature_version.clone(),
        feature_names: meta.feature_names.clone(),
        k: meta.k,
        algo_ids: meta.algo_ids.clone(),
        selectors,
        corpus_mean_ranks: meta.mean_ranks.clone(),
    })
}

/// The ensemble+HP with the lowest corpus mean rank (ties by name).
fn corpus_best(algo_ids: &[String], mean_ranks: &[f64]) -> String {
    let mut order: Vec<usize> = (0..algo_ids.len()).collect();
    order.sort_by(|&a, &b| {
        mean_ranks[a]
            .partial_cmp(&mean_ranks[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| algo_ids[a].cmp(&algo_ids[b]))
    });
    algo_ids[order[0]].clone()
}

/// Runs every classifier on the feature vector; returns the voted-in
/// ensemble+HPs, falling back to the corpus-best one when all vote 0.
pub fn select(model: &SelectorModel, features: &MetaFeatureVector) -> Result<Vec<String>> {
    if model.feature_version != FEATURE_SET_VERSION {
        return Err(Error::FeatureVersionMismatch {
            expected: model.feature_version.clone(),
            actual: FEATURE_SET_VERSION.to_string(),
        });
    }
    let row = features.to_row();
    if row.len() != model.feature_names.len() {
        return Err(Error::InvalidArgument(format!(
            "feature row width {} != selector width {}",
            row.len(),
            model.feature_names.len()
        )));
    }
    let mut chosen = Vec::new();
    for (algo, selector) in model.algo_ids.iter().zip(&model.selectors) {
        let vote = match selector {
            Selector::Forest(f) => f.predict_class(&row),
            Selector::Constant(c) => *c == 1,
        };
        if vote {
            chosen.push(algo.clone());
        }
    }
    if chosen.is_empty() {
        let fallback = corpus_best(&model.algo_ids, &model.corpus_mean_ranks);
        info!("no classifier voted 1; falling back to corpus best `{fallback}`");
        chosen.push(fallback);
    }
    Ok(chosen)
}

/// One point of the (K, N, R) evaluation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaEvalPoint {
    pub k: usize,
    /// Average selected count avg(n).
    pub n: f64,
    /// Average best selected rank avg(r).
    pub r: f64,
}

/// Evaluates per-dataset selections against a rank table: r = best (lowest)
/// rank among the selected, averaged over datasets.
pub fn evaluate_selection(
    table: &RankTable,
    selections: &BTreeMap<String, Vec<String>>,
    k: usize,
) -> MetaEvalPoint {
    let mut n_sum = 0.0;
    let mut r_sum = 0.0;
    let mut datasets = 0usize;
    for (dataset, selected) in selections {
        let Some(d) = table.datasets.iter().position(|x| x == dataset) else {
            warn!("selection for unknown dataset `{dataset}` ignored");
            continue;
        };
        let best = selected
            .iter()
            .filter_map(|algo| {
                table.algorithm_index(algo).and_then(|a| table.ranks[d][a])
            })
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            warn!("no selected algorithm ranked on `{dataset}`; skipped");
            continue;
        }
        n_sum += selected.len() as f64;
        r_sum += best;
        datasets += 1;
    }
    if datasets == 0 {
        return MetaEvalPoint { k, n: 0.0, r: 0.0 };
    }
    MetaEvalPoint { k, n: n_sum / datasets as f64, r: r_sum / datasets as f64 }
}

/// Global top-n ensemble+HPs by training-corpus mean rank; the same set is
/// used for every dataset.
pub fn baseline_autorank(algo_ids: &[String], mean_ranks: &[f64], n: usize) -> Vec<String> {
    let mut order: Vec<usize> = (0..algo_ids.len()).collect();
    order.sort_by(|&a, &b| {
        mean_ranks[a]
            .partial_cmp(&mean_ranks[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| algo_ids[a].cmp(&algo_ids[b]))
    });
    order.into_iter().take(n).map(|i| algo_ids[i].clone()).collect()
}

/// Uniform random n-subset of the grid, deterministic given the seed.
pub fn baseline_random(algo_ids: &[String], n: usize, seed: RngSeed) -> Vec<String> {
    use rand::Rng;
    let mut pool: Vec<usize> = (0..algo_ids.len()).collect();
    let mut rng = seed.rng();
    let take = n.min(pool.len());
    for i in 0..take {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut picked: Vec<usize> = pool[..take].to_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| algo_ids[i].clone()).collect()
}

/// Guards the train/test corpus separation: selector training may never see
/// a test-series row.
pub fn check_partition(train_ids: &[String], test_ids: &[String]) -> Result<()> {
    let train: std::collections::BTreeSet<&String> = train_ids.iter().collect();
    for id in test_ids {
        if train.contains(id) {
            return Err(Error::InvalidArgument(format!(
                "dataset `{id}` appears in both the training and test corpora"
            )));
        }
    }
    Ok(())
}
