//! Greedy pool-composition methods: forward stepwise selection with
//! repetition, its per-seasonal-position bagged variant, and backward
//! elimination of the worst validation performers.

use serde::{Deserialize, Serialize};

use super::{MetaModelKind, WeightVector};
use crate::error::{Error, Result};
use crate::learners::DesignMatrix;
use crate::metrics::{mae, mse, smape_custom};
use crate::rng::RngSeed;
use crate::series::ForecastMatrix;

/// Validation scores usable by the selection procedures; lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BagMetric {
    Mse,
    Mae,
}

impl BagMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            BagMetric::Mse => "mse",
            BagMetric::Mae => "mae",
        }
    }
}

fn smape_score(actual: &[f64], pred: &[f64]) -> f64 {
    smape_custom(actual, pred).unwrap_or(f64::INFINITY)
}

fn metric_score(metric: BagMetric, actual: &[f64], pred: &[f64]) -> f64 {
    match metric {
        BagMetric::Mse => mse(actual, pred),
        BagMetric::Mae => mae(actual, pred),
    }
}

/// Outcome of one forward-selection run: how often each model was added and
/// the validation error of the final average.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    pub counts: Vec<usize>,
    pub error: f64,
}

/// Forward stepwise selection with repetition: start from the single best
/// candidate, then keep adding whichever candidate lowers the error of the
/// running average, until nothing improves or `max_iter` additions.
fn forward_selection(
    preds: &[&[f64]],
    actual: &[f64],
    candidates: &[usize],
    max_iter: usize,
    score: &dyn Fn(&[f64], &[f64]) -> f64,
) -> ForwardResult {
    let n_points = actual.len();
    let mut counts = vec![0usize; preds.len()];
    let mut sum = vec![0.0; n_points];
    let mut total = 0usize;
    let mut current = f64::INFINITY;
    let mut avg = vec![0.0; n_points];
    while total < max_iter {
        let mut best: Option<(usize, f64)> = None;
        for &c in candidates {
            for (a, (&s, &p)) in avg.iter_mut().zip(sum.iter().zip(preds[c])) {
                *a = (s + p) / (total + 1) as f64;
            }
            let e = score(actual, &avg);
            if best.is_none_or(|(_, be)| e < be) {
                best = Some((c, e));
            }
        }
        match best {
            Some((c, e)) if e < current => {
                counts[c] += 1;
                total += 1;
                current = e;
                for (s, &p) in sum.iter_mut().zip(preds[c]) {
                    *s += p;
                }
            }
            _ => break,
        }
    }
    ForwardResult { counts, error: current }
}

fn rows_as_slices(matrix: &ForecastMatrix) -> Vec<&[f64]> {
    matrix.values.iter().map(|r| r.as_slice()).collect()
}

/// §3.2.3-style ensemble model selection on the validation window, scored
/// by customized sMAPE. With `sort`, only the better half of the pool (by
/// individual validation error) is eligible for addition.
pub fn ensemble_model_selection(
    evalid: &ForecastMatrix,
    actual: &[f64],
    sort: bool,
    max_iter: usize,
) -> Result<WeightVector> {
    if evalid.n_models() == 0 {
        return Err(Error::EmptyPool);
    }
    if actual.len() != evalid.horizon() {
        return Err(Error::InvalidArgument(format!(
            "{} validation actuals for a {}-step matrix",
            actual.len(),
            evalid.horizon()
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be ≥ 1".into()));
    }
    let preds = rows_as_slices(evalid);
    let candidates: Vec<usize> = if sort {
        let mut order: Vec<usize> = (0..preds.len()).collect();
        order.sort_by(|&a, &b| {
            let ea = smape_score(actual, preds[a]);
            let eb = smape_score(actual, preds[b]);
            ea.partial_cmp(&eb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| evalid.model_ids[a].cmp(&evalid.model_ids[b]))
        });
        let keep = preds.len().div_ceil(2);
        let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
        kept.sort_unstable();
        kept
    } else {
        (0..preds.len()).collect()
    };
    let result = forward_selection(&preds, actual, &candidates, max_iter, &smape_score);
    let raw: Vec<f64> = result.counts.iter().map(|&c| c as f64).collect();
    WeightVector::from_raw(evalid.model_ids.clone(), &raw)
}

/// Forward selection run independently per seasonal position: evalid points
/// are bagged by `index % m`, each bag learns its own weights, and each test
/// step uses the weights of its own position. Empty bags fall back to the
/// global forward-selection result.
pub fn ensemble_selection_bags(
    evalid: &ForecastMatrix,
    actual: &[f64],
    m: Option<usize>,
    metric: BagMetric,
    max_iter: usize,
    test: &ForecastMatrix,
) -> Result<(Vec<f64>, Vec<WeightVector>)> {
    let m = match m {
        Some(m) if m >= 2 => m,
        _ => {
            return Err(Error::NoSeasonality(
                "selection bags need a detected seasonal period ≥ 2".into(),
            ))
        }
    };
    if evalid.n_models() == 0 {
        return Err(Error::EmptyPool);
    }
    if actual.len() != evalid.horizon() {
        return Err(Error::InvalidArgument(format!(
            "{} validation actuals for a {}-step matrix",
            actual.len(),
            evalid.horizon()
        )));
    }
    let score = |a: &[f64], p: &[f64]| metric_score(metric, a, p);
    let all: Vec<usize> = (0..evalid.n_models()).collect();
    // Global fallback over the whole validation window.
    let preds = rows_as_slices(evalid);
    let global = forward_selection(&preds, actual, &all, max_iter, &score);
    let global_w =
        WeightVector::from_raw(evalid.model_ids.clone(), &to_raw(&global.counts))?;
    let mut bag_weights = Vec::with_capacity(m);
    for pos in 0..m {
        let idx: Vec<usize> = evalid
            .horizon_index
            .iter()
            .enumerate()
            .filter(|(_, &t)| t % m == pos)
            .map(|(j, _)| j)
            .collect();
        if idx.is_empty() {
            bag_weights.push(global_w.clone());
            continue;
        }
        let bag_actual: Vec<f64> = idx.iter().map(|&j| actual[j]).collect();
        let bag_preds: Vec<Vec<f64>> = evalid
            .values
            .iter()
            .map(|row| idx.iter().map(|&j| row[j]).collect())
            .collect();
        let bag_refs: Vec<&[f64]> = bag_preds.iter().map(|r| r.as_slice()).collect();
        let result = forward_selection(&bag_refs, &bag_actual, &all, max_iter, &score);
        bag_weights
            .push(WeightVector::from_raw(evalid.model_ids.clone(), &to_raw(&result.counts))?);
    }
    let mut forecast = Vec::with_capacity(test.horizon());
    for (k, &t) in test.horizon_index.iter().enumerate() {
        let w = &bag_weights[t % m];
        let mut v = 0.0;
        for (id, &wi) in w.model_ids.iter().zip(&w.weights) {
            let row = test
                .row(id)
                .ok_or_else(|| Error::UnknownName(id.clone(), "test forecast matrix".into()))?;
            v += wi * row[k];
        }
        forecast.push(v);
    }
    Ok((forecast, bag_weights))
}

fn to_raw(counts: &[usize]) -> Vec<f64> {
    counts.iter().map(|&c| c as f64).collect()
}

/// How backward elimination combines the surviving models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElimCombination {
    WeightedAverage,
    Stacking(MetaModelKind),
}

/// Combined validation error of a survivor set under the chosen combination.
fn combined_error(
    evalid: &ForecastMatrix,
    actual: &[f64],
    members: &[usize],
    combination: &ElimCombination,
    seed: RngSeed,
) -> f64 {
    match combination {
        ElimCombination::WeightedAverage => {
            let avg: Vec<f64> = (0..actual.len())
                .map(|k| {
                    members.iter().map(|&i| evalid.values[i][k]).sum::<f64>()
                        / members.len() as f64
                })
                .collect();
            smape_score(actual, &avg)
        }
        ElimCombination::Stacking(meta) => {
            let rows: Vec<Vec<f64>> = (0..actual.len())
                .map(|k| members.iter().map(|&i| evalid.values[i][k]).collect())
                .collect();
            let names = members.iter().map(|&i| evalid.model_ids[i].clone()).collect();
            match DesignMatrix::new(names, rows.clone(), actual.to_vec())
                .and_then(|x| meta.fit(&x, seed))
            {
                Ok(fitted) => smape_score(actual, &fitted.predict(&rows)),
                Err(_) => f64::INFINITY,
            }
        }
    }
}

/// Starts from all models and repeatedly drops the member with the worst
/// individual validation error, as long as dropping it strictly lowers the
/// combined validation error. Survivors are combined by equal-weight
/// averaging or basic stacking.
pub fn ensemble_backward_elimination(
    evalid: &ForecastMatrix,
    actual: &[f64],
    combination: &ElimCombination,
    test: &ForecastMatrix,
    seed: RngSeed,
) -> Result<Vec<f64>> {
    if evalid.n_models() < 2 {
        return Err(Error::InvalidArgument(format!(
            "backward elimination needs ≥ 2 models, got {}",
            evalid.n_models()
        )));
    }
    if actual.len() != evalid.horizon() {
        return Err(Error::InvalidArgument(format!(
            "{} validation actuals for a {}-step matrix",
            actual.len(),
            evalid.horizon()
        )));
    }
    let individual: Vec<f64> =
        evalid.values.iter().map(|row| smape_score(actual, row)).collect();
    let mut members: Vec<usize> = (0..evalid.n_models()).collect();
    let mut current = combined_error(evalid, actual, &members, combination, seed);
    while members.len() > 1 {
        let worst_pos = members
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| {
                individual[a].partial_cmp(&individual[b]).unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(pos, _)| pos)
            .unwrap();
        let mut trial = members.clone();
        trial.remove(worst_pos);
        let trial_error = combined_error(evalid, actual, &trial, combination, seed);
        if trial_error < current {
            members = trial;
            current = trial_error;
        } else {
            break;
        }
    }
    let ids: Vec<String> = members.iter().map(|&i| evalid.model_ids[i].clone()).collect();
    match combination {
        ElimCombination::WeightedAverage => {
            let weights = WeightVector::uniform(ids)?;
            weights.apply(test)
        }
        ElimCombination::Stacking(meta) => {
            let sub_evalid = evalid.select(&ids)?;
            let sub_test = test.select(&ids)?;
            super::stacking::ensemble_stacking_basic(&sub_evalid, actual, *meta, &sub_test, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(ids: &[&str], rows: Vec<Vec<f64>>, index: Vec<usize>) -> ForecastMatrix {
        ForecastMatrix::new(ids.iter().map(|s| s.to_string()).collect(), rows, index).unwrap()
    }

    #[test]
    fn zero_error_model_takes_all_weight() {
        let actual = vec![5.0, 6.0, 7.0, 8.0];
        let evalid = matrix(
            &["exact", "off"],
            vec![actual.clone(), vec![9.0, 9.0, 9.0, 9.0]],
            (0..4).collect(),
        );
        let w = ensemble_model_selection(&evalid, &actual, false, 20).unwrap();
        assert_eq!(w.weights, vec![1.0, 0.0]);
    }

    #[test]
    fn symmetric_over_under_converge_to_half() {
        let actual: Vec<f64> = (0..12).map(|t| 10.0 + t as f64).collect();
        let over: Vec<f64> = actual.iter().map(|v| v + 1.0).collect();
        let under: Vec<f64> = actual.iter().map(|v| v - 1.0).collect();
        let evalid = matrix(&["over", "under"], vec![over, under], (0..12).collect());
        let w = ensemble_model_selection(&evalid, &actual, false, 20).unwrap();
        assert!((w.weights[0] - 0.5).abs() <= 0.1, "weights {:?}", w.weights);
        assert!((w.weights[0] + w.weights[1] - 1.0).abs() < 1e-9);
    }

    /// Independent naive reimplementation of the stepwise procedure: at each
    /// step score every candidate addition multiset from scratch (no running
    /// sums), add the strict improver with the lowest error (first index on
    /// ties), stop when none improves or `max_iter` additions were made.
    fn stepwise_oracle(preds: &[&[f64]], actual: &[f64], max_iter: usize) -> (Vec<usize>, f64) {
        let scored = |counts: &[usize]| -> f64 {
            let total: usize = counts.iter().sum();
            let avg: Vec<f64> = (0..actual.len())
                .map(|k| {
                    counts
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| c as f64 * preds[i][k])
                        .sum::<f64>()
                        / total as f64
                })
                .collect();
            smape_score(actual, &avg)
        };
        let mut counts = vec![0usize; preds.len()];
        let mut current = f64::INFINITY;
        for _ in 0..max_iter {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..preds.len() {
                counts[i] += 1;
                let e = scored(&counts);
                counts[i] -= 1;
                if best.is_none_or(|(_, be)| e < be) {
                    best = Some((i, e));
                }
            }
            match best {
                Some((i, e)) if e < current => {
                    counts[i] += 1;
                    current = e;
                }
                _ => break,
            }
        }
        (counts, current)
    }

    #[test]
    fn greedy_matches_stepwise_oracle_on_small_pools() {
        let mut rng = crate::rng::RngSeed(99).rng();
        use rand::Rng;
        for case in 0..200 {
            let n_models = 2 + (case % 2);
            let n_points = 4 + (case % 4);
            let max_iter = 1 + (case % 5);
            let actual: Vec<f64> =
                (0..n_points).map(|_| rng.random_range(1.0..20.0)).collect();
            let rows: Vec<Vec<f64>> = (0..n_models)
                .map(|_| actual.iter().map(|&a| a + rng.random_range(-5.0..5.0)).collect())
                .collect();
            let ids: Vec<String> = (0..n_models).map(|i| format!("m{i}")).collect();
            let evalid =
                ForecastMatrix::new(ids, rows.clone(), (0..n_points).collect()).unwrap();
            let w = ensemble_model_selection(&evalid, &actual, false, max_iter).unwrap();
            let combined: Vec<f64> = (0..n_points)
                .map(|k| {
                    w.weights.iter().zip(&rows).map(|(&wi, r)| wi * r[k]).sum::<f64>()
                })
                .collect();
            let greedy_err = smape_score(&actual, &combined);
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let (counts, oracle_err) = stepwise_oracle(&refs, &actual, max_iter);
            assert!(
                (greedy_err - oracle_err).abs() <= 1e-12,
                "case {case}: greedy {greedy_err} vs oracle {oracle_err}"
            );
            let total: usize = counts.iter().sum();
            let oracle_weights: Vec<f64> =
                counts.iter().map(|&c| c as f64 / total as f64).collect();
            for (got, want) in w.weights.iter().zip(&oracle_weights) {
                assert!((got - want).abs() <= 1e-12, "case {case}: {:?} vs {counts:?}", w.weights);
            }
            // The start is the best single model, and additions only ever
            // improve, so the result can never be worse than any single model.
            let best_single = refs
                .iter()
                .map(|r| smape_score(&actual, r))
                .fold(f64::INFINITY, f64::min);
            assert!(greedy_err <= best_single + 1e-12, "case {case}");
        }
    }

    #[test]
    fn sorted_mode_restricts_to_better_half() {
        let actual = vec![10.0, 10.0, 10.0, 10.0];
        // "bad" is far off; with sort=true and 2 models, only the best 1 is
        // eligible, so "bad" can never receive weight.
        let evalid = matrix(
            &["good", "bad"],
            vec![vec![10.5, 10.5, 10.5, 10.5], vec![50.0, 50.0, 50.0, 50.0]],
            (0..4).collect(),
        );
        let w = ensemble_model_selection(&evalid, &actual, true, 20).unwrap();
        assert_eq!(w.weights[1], 0.0);
    }

    #[test]
    fn bags_pick_position_specialists() {
        // m=2: model a is exact on even positions, model b on odd ones.
        let actual: Vec<f64> = (0..10).map(|t| if t % 2 == 0 { 10.0 } else { 20.0 }).collect();
        let a: Vec<f64> =
            (0..10).map(|t| if t % 2 == 0 { 10.0 } else { 27.0 }).collect();
        let b: Vec<f64> =
            (0..10).map(|t| if t % 2 == 0 { 3.0 } else { 20.0 }).collect();
        let evalid = matrix(&["a", "b"], vec![a, b], (0..10).collect());
        let test = matrix(
            &["a", "b"],
            vec![vec![11.0, 13.0], vec![5.0, 21.0]],
            vec![10, 11],
        );
        let (forecast, bags) =
            ensemble_selection_bags(&evalid, &actual, Some(2), BagMetric::Mse, 20, &test)
                .unwrap();
        assert_eq!(bags[0].weights, vec![1.0, 0.0], "even bag picks a");
        assert_eq!(bags[1].weights, vec![0.0, 1.0], "odd bag picks b");
        // Test index 10 is even → a's value; 11 odd → b's value.
        assert_eq!(forecast, vec![11.0, 21.0]);
    }

    #[test]
    fn identical_bags_reduce_to_global_selection() {
        let actual = vec![4.0, 4.0, 4.0, 4.0];
        let evalid = matrix(
            &["a", "b"],
            vec![vec![5.0, 5.0, 5.0, 5.0], vec![2.0, 2.0, 2.0, 2.0]],
            (0..4).collect(),
        );
        let test = matrix(&["a", "b"], vec![vec![5.0], vec![2.0]], vec![4]);
        let (_, bags) =
            ensemble_selection_bags(&evalid, &actual, Some(2), BagMetric::Mae, 20, &test)
                .unwrap();
        let global = ensemble_model_selection(&evalid, &actual, false, 20).unwrap();
        // Both bags see the same constant data, so they match the global
        // forward-selection weights (computed with mae here, but the data
        // is symmetric enough that the counts coincide).
        assert_eq!(bags[0].weights, bags[1].weights);
        assert_eq!(bags[0].weights, global.weights);
    }

    #[test]
    fn bags_without_period_error() {
        let actual = vec![1.0, 2.0];
        let evalid = matrix(&["a"], vec![vec![1.0, 2.0]], vec![0, 1]);
        let test = matrix(&["a"], vec![vec![3.0]], vec![2]);
        assert!(matches!(
            ensemble_selection_bags(&evalid, &actual, None, BagMetric::Mse, 20, &test),
            Err(Error::NoSeasonality(_))
        ));
    }

    #[test]
    fn elimination_drops_garbage_keeps_perfect() {
        let actual = vec![5.0, 6.0, 7.0, 8.0];
        let evalid = matrix(
            &["perfect", "garbage"],
            vec![actual.clone(), vec![100.0, 100.0, 100.0, 100.0]],
            (0..4).collect(),
        );
        let test = matrix(
            &["perfect", "garbage"],
            vec![vec![9.0, 10.0], vec![100.0, 100.0]],
            vec![4, 5],
        );
        let forecast = ensemble_backward_elimination(
            &evalid,
            &actual,
            &ElimCombination::WeightedAverage,
            &test,
            RngSeed(3),
        )
        .unwrap();
        assert_eq!(forecast, vec![9.0, 10.0]);
    }

    #[test]
    fn elimination_keeps_identical_models() {
        let actual = vec![5.0, 6.0];
        let row = vec![5.5, 6.5];
        let evalid =
            matrix(&["a", "b", "c"], vec![row.clone(), row.clone(), row.clone()], vec![0, 1]);
        let test = matrix(
            &["a", "b", "c"],
            vec![vec![7.0], vec![7.0], vec![7.0]],
            vec![2],
        );
        let forecast = ensemble_backward_elimination(
            &evalid,
            &actual,
            &ElimCombination::WeightedAverage,
            &test,
            RngSeed(3),
        )
        .unwrap();
        // No removal strictly improves, so all three stay; mean is 7.
        assert_eq!(forecast.len(), 1);
        assert!((forecast[0] - 7.0).abs() < 1e-12, "{forecast:?}");
    }

    #[test]
    fn elimination_never_worse_than_full_average() {
        let mut rng = crate::rng::RngSeed(41).rng();
        use rand::Rng;
        for _ in 0..50 {
            let n_models = 2 + rng.random_range(0..4usize);
            let n_points = 5 + rng.random_range(0..5usize);
            let actual: Vec<f64> = (0..n_points).map(|_| rng.random_range(5.0..30.0)).collect();
            let rows: Vec<Vec<f64>> = (0..n_models)
                .map(|_| actual.iter().map(|&a| a + rng.random_range(-8.0..8.0)).collect())
                .collect();
            let ids: Vec<String> = (0..n_models).map(|i| format!("m{i}")).collect();
            let evalid = ForecastMatrix::new(
                ids.clone(),
                rows.clone(),
                (0..n_points).collect(),
            )
            .unwrap();
            // Reuse evalid as "test" so the returned forecast is directly
            // scoreable against the validation actuals.
            let forecast = ensemble_backward_elimination(
                &evalid,
                &actual,
                &ElimCombination::WeightedAverage,
                &evalid,
                RngSeed(5),
            )
            .unwrap();
            let final_err = smape_score(&actual, &forecast);
            let full_avg: Vec<f64> = (0..n_points)
                .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n_models as f64)
                .collect();
            let initial_err = smape_score(&actual, &full_avg);
            assert!(final_err <= initial_err + 1e-12);
        }
    }
}
