//! Stacked generalization over the base pool: expanding-window k-fold
//! stacking, a basic train/validation variant, and the superbooster (a
//! meta-model trained on top of a single base model with optional
//! noise-augmented targets and exogenous features).

use log::warn;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ExoFeatures, MetaModelKind, SuperboosterBase};
use crate::base_models::{fit_base, FittedPool, ModelName};
use crate::error::{Error, Result};
use crate::learners::DesignMatrix;
use crate::rng::RngSeed;
use crate::series::{EnsembleTrainSplit, ForecastMatrix};

/// Out-of-fold predictions from expanding-window cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct OofData {
    pub model_ids: Vec<String>,
    /// `rows[i][m]` = model m's out-of-fold prediction for OOF point i.
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Index into `train` of the first out-of-fold point.
    pub start: usize,
    /// Points per fold.
    pub chunk: usize,
    pub n_folds: usize,
}

impl OofData {
    /// Which fold an OOF point belongs to.
    pub fn fold_of(&self, oof_index: usize) -> usize {
        oof_index / self.chunk
    }
}

/// Collects out-of-fold predictions: the series tail is cut into `n_folds`
/// contiguous chunks, and each chunk is predicted by models fit only on
/// strictly earlier data. Models failing any fold are dropped with a logged
/// warning.
pub fn stacking_oof(
    pool: &[ModelName],
    train: &[f64],
    n_folds: usize,
    seasonality: &crate::preprocess::SeasonalityInfo,
) -> Result<OofData> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if n_folds == 0 {
        return Err(Error::InvalidArgument("stacking needs at least one fold".into()));
    }
    let n = train.len();
    let chunk = n / (n_folds + 1);
    let start = n - n_folds * chunk;
    if chunk == 0 || start < 2 {
        return Err(Error::SeriesTooShort(format!(
            "{n} points cannot host {n_folds} expanding-window folds with a ≥ 2-point warmup"
        )));
    }
    let mut names: Vec<ModelName> = Vec::new();
    for &name in pool {
        if !names.contains(&name) {
            names.push(name);
        }
    }
    let mut ids = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for name in names {
        let mut column = Vec::with_capacity(n - start);
        let mut ok = true;
        for f in 0..n_folds {
            let fit_end = start + f * chunk;
            match fit_base(name, &train[..fit_end], seasonality) {
                Ok((model, _)) => column.extend(model.predict(chunk)),
                Err(e) => {
                    warn!("stacking drops {name}: fold {f} failed: {e}");
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            ids.push(name.to_string());
            columns.push(column);
        }
    }
    if ids.is_empty() {
        return Err(Error::FitFailed("no base model survived every stacking fold".into()));
    }
    let rows: Vec<Vec<f64>> =
        (0..n - start).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    Ok(OofData { model_ids: ids, rows, targets: train[start..].to_vec(), start, chunk, n_folds })
}

/// Super-learner stacking: a meta-model is trained on out-of-fold base
/// predictions, then applied to the test-horizon predictions of the bases
/// refit on the full series.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_stacking(
    pool: &[ModelName],
    train: &[f64],
    h: usize,
    meta: MetaModelKind,
    n_folds: usize,
    seasonality: &crate::preprocess::SeasonalityInfo,
    seed: RngSeed,
) -> Result<Vec<f64>> {
    let oof = stacking_oof(pool, train, n_folds, seasonality)?;
    // Refit survivors on the full series; a model failing here is dropped
    // from the design as well.
    let mut keep: Vec<usize> = Vec::new();
    let mut test_columns: Vec<Vec<f64>> = Vec::new();
    for (m, id) in oof.model_ids.iter().enumerate() {
        let name: ModelName = id.parse()?;
        match fit_base(name, train, seasonality) {
            Ok((model, _)) => {
                keep.push(m);
                test_columns.push(model.predict(h));
            }
            Err(e) => warn!("stacking drops {name} at full refit: {e}"),
        }
    }
    if keep.is_empty() {
        return Err(Error::FitFailed("no base model survived the full-train refit".into()));
    }
    let names: Vec<String> = keep.iter().map(|&m| oof.model_ids[m].clone()).collect();
    let rows: Vec<Vec<f64>> =
        oof.rows.iter().map(|r| keep.iter().map(|&m| r[m]).collect()).collect();
    let design = DesignMatrix::new(names, rows, oof.targets.clone())?;
    let fitted = meta.fit(&design, seed.derive("meta"))?;
    let test_rows: Vec<Vec<f64>> =
        (0..h).map(|k| test_columns.iter().map(|c| c[k]).collect()).collect();
    Ok(fitted.predict(&test_rows))
}

/// Basic stacking on the ensemble train/validation split: the meta-model is
/// fit on (validation predictions → validation actuals) and applied to the
/// test predictions.
pub fn ensemble_stacking_basic(
    evalid: &ForecastMatrix,
    actual: &[f64],
    meta: MetaModelKind,
    test: &ForecastMatrix,
    seed: RngSeed,
) -> Result<Vec<f64>> {
    if evalid.n_models() == 0 {
        return Err(Error::EmptyPool);
    }
    if evalid.model_ids != test.model_ids {
        return Err(Error::PoolMismatch(format!(
            "validation pool {:?} differs from test pool {:?}",
            evalid.model_ids, test.model_ids
        )));
    }
    if actual.len() != evalid.horizon() {
        return Err(Error::InvalidArgument(format!(
            "{} validation actuals for a {}-step matrix",
            actual.len(),
            evalid.horizon()
        )));
    }
    if evalid.horizon() < 2 {
        return Err(Error::SeriesTooShort(format!(
            "basic stacking needs ≥ 2 validation points, got {}",
            evalid.horizon()
        )));
    }
    let rows: Vec<Vec<f64>> = (0..actual.len())
        .map(|k| evalid.values.iter().map(|r| r[k]).collect())
        .collect();
    let design = DesignMatrix::new(evalid.model_ids.clone(), rows, actual.to_vec())?;
    let fitted = meta.fit(&design, seed.derive("meta"))?;
    let test_rows: Vec<Vec<f64>> = (0..test.horizon())
        .map(|k| test.values.iter().map(|r| r[k]).collect())
        .collect();
    Ok(fitted.predict(&test_rows))
}

/// Noise scale applied to the augmented targets.
pub const SUPERBOOSTER_ALPHA: f64 = 0.1;

/// The noise-augmented training targets of the superbooster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperboosterAugmentation {
    pub alpha: f64,
    /// Number of etrain rows.
    pub l: usize,
    /// Number of evalid rows.
    pub v: usize,
    /// Mean absolute validation error of the base model.
    pub delta_y: f64,
    pub y_noisy: Vec<f64>,
    /// `[y_noisy; y_evalid]`, length L + V.
    pub y_extended: Vec<f64>,
}

/// Builds the augmented target vector: etrain targets plus α-scaled normal
/// noise with variance Δy (the base model's mean absolute validation
/// error), concatenated with the untouched validation targets.
pub fn build_augmentation(
    y_etrain: &[f64],
    y_evalid: &[f64],
    yhat_evalid: &[f64],
    noise: bool,
    seed: RngSeed,
) -> Result<SuperboosterAugmentation> {
    if y_evalid.len() != yhat_evalid.len() {
        return Err(Error::InvalidArgument(format!(
            "{} validation targets but {} predictions",
            y_evalid.len(),
            yhat_evalid.len()
        )));
    }
    if y_evalid.is_empty() {
        return Err(Error::InvalidArgument("superbooster needs validation points".into()));
    }
    let v = y_evalid.len();
    let delta_y =
        y_evalid.iter().zip(yhat_evalid).map(|(y, f)| (y - f).abs()).sum::<f64>() / v as f64;
    let y_noisy = if noise && delta_y > 0.0 {
        let law = Normal::new(0.0, delta_y.sqrt())
            .map_err(|e| Error::InvalidArgument(format!("noise law: {e}")))?;
        let mut rng = seed.rng();
        y_etrain.iter().map(|&y| y + SUPERBOOSTER_ALPHA * law.sample(&mut rng)).collect()
    } else {
        y_etrain.to_vec()
    };
    let mut y_extended = y_noisy.clone();
    y_extended.extend_from_slice(y_evalid);
    Ok(SuperboosterAugmentation {
        alpha: SUPERBOOSTER_ALPHA,
        l: y_etrain.len(),
        v,
        delta_y,
        y_noisy,
        y_extended,
    })
}

/// Resolves which base model the superbooster sits on.
fn resolve_base(base: &SuperboosterBase, pool: &FittedPool) -> Result<ModelName> {
    match base {
        SuperboosterBase::Named(name) => {
            if pool.evalid.model_ids.iter().any(|id| id == name.as_str()) {
                Ok(*name)
            } else {
                Err(Error::UnknownName(name.to_string(), "fitted pool".into()))
            }
        }
        SuperboosterBase::Best => pool
            .reports
            .iter()
            .min_by(|(na, ra), (nb, rb)| {
                ra.training_error
                    .partial_cmp(&rb.training_error)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| na.as_str().cmp(nb.as_str()))
            })
            .map(|(name, _)| *name)
            .ok_or(Error::EmptyPool),
    }
}

/// A meta-model trained on top of one base model: rows are the base
/// model's etrain in-sample and evalid predictions joined with per-step
/// exogenous features; targets are the (optionally noise-augmented)
/// extended target vector.
#[allow(clippy::too_many_arguments)]
pub fn superbooster(
    base: &SuperboosterBase,
    pool: &FittedPool,
    train: &[f64],
    split: &EnsembleTrainSplit,
    h: usize,
    exo: Option<&ExoFeatures>,
    noise: bool,
    meta: MetaModelKind,
    seed: RngSeed,
) -> Result<(Vec<f64>, SuperboosterAugmentation)> {
    if let Some(exo) = exo {
        if exo.train_rows.len() != train.len() || exo.test_rows.len() != h {
            return Err(Error::InvalidArgument(format!(
                "exogenous features cover {} train and {} test steps; need {} and {h}",
                exo.train_rows.len(),
                exo.test_rows.len(),
                train.len()
            )));
        }
    }
    let name = resolve_base(base, pool)?;
    let id = name.to_string();
    let report = pool
        .reports
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, r)| r)
        .ok_or_else(|| Error::UnknownName(id.clone(), "fit reports".into()))?;
    let errors = &report.in_sample_one_step_errors;
    let warmup = split.etrain.len() - errors.len();
    let evalid_preds = pool
        .evalid
        .row(&id)
        .ok_or_else(|| Error::UnknownName(id.clone(), "validation forecasts".into()))?;
    let test_preds = pool
        .test
        .row(&id)
        .ok_or_else(|| Error::UnknownName(id.clone(), "test forecasts".into()))?;
    let mut feature_rows = Vec::new();
    let mut y_etrain = Vec::new();
    let exo_row = |t: usize| -> Vec<f64> {
        exo.map(|e| e.train_rows[t].clone()).unwrap_or_default()
    };
    for (i, &e) in errors.iter().enumerate() {
        let t = split.etrain.start + warmup + i;
        let mut row = vec![train[t] - e];
        row.extend(exo_row(t));
        feature_rows.push(row);
        y_etrain.push(train[t]);
    }
    let y_evalid = &train[split.evalid.clone()];
    for (k, &pred) in evalid_preds.iter().enumerate() {
        let mut row = vec![pred];
        row.extend(exo_row(split.evalid.start + k));
        feature_rows.push(row);
    }
    let aug =
        build_augmentation(&y_etrain, y_evalid, evalid_preds, noise, seed.derive("noise"))?;
    let mut names = vec!["base_pred".to_string()];
    if let Some(exo) = exo {
        names.extend(exo.names.iter().cloned());
    }
    let design = DesignMatrix::new(names, feature_rows, aug.y_extended.clone())?;
    let fitted = meta.fit(&design, seed.derive("meta"))?;
    let test_rows: Vec<Vec<f64>> = (0..h)
        .map(|k| {
            let mut row = vec![test_preds[k]];
            if let Some(exo) = exo {
                row.extend(exo.test_rows[k].iter().cloned());
            }
            row
        })
        .collect();
    Ok((fitted.predict(&test_rows), aug))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_models::fit_all;
    use crate::metrics::smape_custom;
    use crate::preprocess::SeasonalityInfo;

    fn matrix(ids: &[&str], rows: Vec<Vec<f64>>, index: Vec<usize>) -> ForecastMatrix {
        ForecastMatrix::new(ids.iter().map(|s| s.to_string()).collect(), rows, index).unwrap()
    }

    #[test]
    fn basic_single_perfect_model_is_identity() {
        let actual = vec![4.0, 5.5, 6.0, 7.5, 8.0];
        let evalid = matrix(&["base"], vec![actual.clone()], (0..5).collect());
        let test = matrix(&["base"], vec![vec![9.0, 10.0]], vec![5, 6]);
        let out = ensemble_stacking_basic(
            &evalid,
            &actual,
            MetaModelKind::Linreg,
            &test,
            RngSeed(1),
        )
        .unwrap();
        assert!((out[0] - 9.0).abs() < 1e-6 && (out[1] - 10.0).abs() < 1e-6, "{out:?}");
    }

    #[test]
    fn basic_learns_half_half_average() {
        let a: Vec<f64> = (0..10).map(|t| 10.0 + t as f64).collect();
        let b: Vec<f64> = (0..10).map(|t| 20.0 - (t as f64) * 0.5).collect();
        let actual: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
        let evalid = matrix(&["a", "b"], vec![a, b], (0..10).collect());
        let test = matrix(&["a", "b"], vec![vec![30.0], vec![10.0]], vec![10]);
        let out = ensemble_stacking_basic(
            &evalid,
            &actual,
            MetaModelKind::Linreg,
            &test,
            RngSeed(1),
        )
        .unwrap();
        assert!((out[0] - 20.0).abs() < 1e-5, "expected (30+10)/2, got {out:?}");
    }

    #[test]
    fn basic_rejects_single_validation_point() {
        let evalid = matrix(&["a"], vec![vec![1.0]], vec![0]);
        let test = matrix(&["a"], vec![vec![2.0]], vec![1]);
        assert!(matches!(
            ensemble_stacking_basic(&evalid, &[1.0], MetaModelKind::Linreg, &test, RngSeed(1)),
            Err(Error::SeriesTooShort(_))
        ));
    }

    #[test]
    fn oof_folds_are_causal() {
        // Perturbing the last fold's data must not change earlier folds'
        // out-of-fold predictions.
        let train: Vec<f64> = (0..60).map(|t| 10.0 + (t as f64 * 0.37).sin() * 3.0).collect();
        let info = SeasonalityInfo::default();
        let pool = [ModelName::Naive, ModelName::Meanf, ModelName::Rwdrift];
        let oof = stacking_oof(&pool, &train, 5, &info).unwrap();
        let mut perturbed = train.clone();
        let last_fold_start = oof.start + (oof.n_folds - 1) * oof.chunk;
        for v in &mut perturbed[last_fold_start..] {
            *v += 100.0;
        }
        let oof_p = stacking_oof(&pool, &perturbed, 5, &info).unwrap();
        assert_eq!(oof.start, oof_p.start);
        let earlier = (oof.n_folds - 1) * oof.chunk;
        for i in 0..earlier {
            assert_eq!(oof.rows[i], oof_p.rows[i], "fold {} leaked", oof.fold_of(i));
        }
    }

    #[test]
    fn naive_oof_on_ramp_regresses_to_exact_fold_offset() {
        // On y_t = t, the naive prediction for every point of a fold is the
        // value just before the fold start, so target − prediction cycles
        // through 1..=chunk within each fold. Regressing targets on the OOF
        // column must therefore give slope 1 and intercept (chunk+1)/2; any
        // index misalignment between rows and targets shifts the intercept.
        let train: Vec<f64> = (0..200).map(|t| t as f64).collect();
        let info = SeasonalityInfo::default();
        let oof = stacking_oof(&[ModelName::Naive], &train, 5, &info).unwrap();
        assert_eq!((oof.chunk, oof.start), (33, 35));
        let design = DesignMatrix::new(
            vec!["naive".into()],
            oof.rows.clone(),
            oof.targets.clone(),
        )
        .unwrap();
        let model = crate::learners::fit_linreg(&design).unwrap();
        assert!(
            (model.coefficients[0] - 1.0).abs() < 1e-6,
            "slope {}",
            model.coefficients[0]
        );
        assert!((model.intercept - 17.0).abs() < 1e-6, "intercept {}", model.intercept);
    }

    #[test]
    fn perfect_base_gives_near_zero_stacking_error() {
        // rwdrift is exact on a perfect line, so the stacked forecast is too.
        let train: Vec<f64> = (0..60).map(|t| 3.0 + 2.0 * t as f64).collect();
        let info = SeasonalityInfo::default();
        let forecast = ensemble_stacking(
            &[ModelName::Rwdrift],
            &train,
            4,
            MetaModelKind::Linreg,
            5,
            &info,
            RngSeed(1),
        )
        .unwrap();
        let truth: Vec<f64> = (60..64).map(|t| 3.0 + 2.0 * t as f64).collect();
        let err = smape_custom(&truth, &forecast).unwrap();
        assert!(err < 1e-6, "sMAPE {err}, forecast {forecast:?}");
    }

    #[test]
    fn stacking_rejects_too_short_series() {
        // Six points with five folds leaves only one point before the first
        // fold (chunk = 1, first prefix length 1), which no model can fit.
        let train = vec![1.0; 6];
        let info = SeasonalityInfo::default();
        assert!(matches!(
            ensemble_stacking(
                &[ModelName::Naive],
                &train,
                2,
                MetaModelKind::Linreg,
                5,
                &info,
                RngSeed(1)
            ),
            Err(Error::SeriesTooShort(_))
        ));
    }

    #[test]
    fn augmentation_length_is_l_plus_v() {
        let y_etrain = vec![1.0; 40];
        let y_evalid = vec![2.0; 10];
        let yhat = vec![2.5; 10];
        let aug = build_augmentation(&y_etrain, &y_evalid, &yhat, true, RngSeed(5)).unwrap();
        assert_eq!(aug.l, 40);
        assert_eq!(aug.v, 10);
        assert_eq!(aug.y_extended.len(), 50);
        assert!((aug.delta_y - 0.5).abs() < 1e-12);
        // The validation tail is untouched.
        assert_eq!(&aug.y_extended[40..], &y_evalid[..]);
    }

    #[test]
    fn augmentation_noise_std_matches_declared_law() {
        // r_v ~ N(0, Δy) with std √Δy, scaled by α = 0.1: the empirical std
        // of y_noisy − y_etrain over 10⁴ draws must be ≈ 0.1·√Δy.
        let y_etrain = vec![0.0; 100];
        let y_evalid = vec![0.0; 10];
        let yhat = vec![4.0; 10]; // Δy = 4, √Δy = 2
        let mut draws = Vec::with_capacity(10_000);
        for s in 0..100 {
            let aug =
                build_augmentation(&y_etrain, &y_evalid, &yhat, true, RngSeed(s)).unwrap();
            draws.extend(aug.y_noisy.iter().copied());
        }
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
        let expected = SUPERBOOSTER_ALPHA * 2.0;
        assert!(
            (var.sqrt() - expected).abs() / expected < 0.05,
            "empirical std {} vs expected {expected}",
            var.sqrt()
        );
    }

    #[test]
    fn augmentation_without_noise_keeps_targets() {
        let y_etrain = vec![3.0, 4.0];
        let aug =
            build_augmentation(&y_etrain, &[5.0], &[5.5], false, RngSeed(1)).unwrap();
        assert_eq!(aug.y_noisy, y_etrain);
        assert_eq!(aug.y_extended, vec![3.0, 4.0, 5.0]);
    }

    fn weekday_exo(n_train: usize, h: usize) -> ExoFeatures {
        let names: Vec<String> = (0..7).map(|d| format!("dow_{d}")).collect();
        let one_hot = |t: usize| -> Vec<f64> {
            (0..7).map(|d| if t % 7 == d { 1.0 } else { 0.0 }).collect()
        };
        ExoFeatures {
            names,
            train_rows: (0..n_train).map(one_hot).collect(),
            test_rows: (n_train..n_train + h).map(one_hot).collect(),
        }
    }

    #[test]
    fn superbooster_beats_plain_naive_on_weekday_signal() {
        let effects = [10.0, 14.0, 9.0, 12.0, 16.0, 20.0, 11.0];
        let h = 14;
        let mut wins = 0;
        for s in 0..10u64 {
            let mut rng = RngSeed(1000 + s).rng();
            let noise = Normal::new(0.0, 0.3).unwrap();
            let full: Vec<f64> =
                (0..500).map(|t| effects[t % 7] + noise.sample(&mut rng)).collect();
            let (train, truth) = full.split_at(500 - h);
            let split = EnsembleTrainSplit {
                etrain: 0..train.len() - 50,
                evalid: train.len() - 50..train.len(),
            };
            let info = SeasonalityInfo::default();
            let pool = fit_all(&[ModelName::Naive], train, &split, &info, h).unwrap();
            let exo = weekday_exo(train.len(), h);
            let (forecast, _) = superbooster(
                &SuperboosterBase::Named(ModelName::Naive),
                &pool,
                train,
                &split,
                h,
                Some(&exo),
                true,
                MetaModelKind::Linreg,
                RngSeed(7).derive_index(s),
            )
            .unwrap();
            let sb = smape_custom(truth, &forecast).unwrap();
            let plain = smape_custom(truth, pool.test.row("naive").unwrap()).unwrap();
            if sb < plain {
                wins += 1;
            }
        }
        assert!(wins >= 9, "superbooster beat naive on only {wins}/10 seeds");
    }

    #[test]
    fn superbooster_best_resolves_lowest_training_error() {
        let train: Vec<f64> = (0..60).map(|t| 5.0 + 0.5 * t as f64).collect();
        let split = EnsembleTrainSplit { etrain: 0..48, evalid: 48..60 };
        let info = SeasonalityInfo::default();
        let pool = fit_all(
            &[ModelName::Naive, ModelName::Rwdrift, ModelName::Meanf],
            &train,
            &split,
            &info,
            4,
        )
        .unwrap();
        // rwdrift is exact on a line, so `best` must resolve to it.
        let best = resolve_base(&SuperboosterBase::Best, &pool).unwrap();
        assert_eq!(best, ModelName::Rwdrift);
        let (forecast, aug) = superbooster(
            &SuperboosterBase::Best,
            &pool,
            &train,
            &split,
            4,
            None,
            false,
            MetaModelKind::Linreg,
            RngSeed(2),
        )
        .unwrap();
        assert_eq!(aug.y_extended.len(), aug.l + aug.v);
        let truth: Vec<f64> = (60..64).map(|t| 5.0 + 0.5 * t as f64).collect();
        for (f, t) in forecast.iter().zip(truth) {
            assert!((f - t).abs() < 1e-6, "forecast {forecast:?}");
        }
    }
}
