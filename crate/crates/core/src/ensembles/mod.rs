//! Ensemble combination methods over a pool of fitted base forecasters:
//! validation-error weighting, stacking, forward selection and seasonal
//! bagging, backward elimination, feature-weighted averaging, recency
//! weighting, superboosting, and fixed equal-weight combinations. Every
//! method consumes an immutable `ForecastMatrix` and emits a forecast plus,
//! where meaningful, the weight vector it used.

mod fforma;
mod selection;
mod spec;
mod stacking;

use log::warn;
use serde::{Deserialize, Serialize};

pub use fforma::{fforma_apply, fforma_train, FformaExample, FformaModel};
pub use selection::{
    ensemble_backward_elimination, ensemble_model_selection, ensemble_selection_bags, BagMetric,
    ElimCombination, ForwardResult,
};
pub use spec::{EnsembleMethod, EnsembleSpec, SuperboosterBase};
pub use stacking::{
    build_augmentation, ensemble_stacking, ensemble_stacking_basic, stacking_oof, superbooster,
    OofData, SuperboosterAugmentation,
};

use crate::base_models::{FittedPool, ModelName};
use crate::error::{Error, Result};
use crate::learners::{
    fit_gbt, fit_linreg, fit_rf, DesignMatrix, GbtModel, GbtParams, LinearModel, RandomForest,
    RfParams, SquaredError, TreeTask,
};
use crate::preprocess::SeasonalityInfo;
use crate::rng::RngSeed;
use crate::series::{EnsembleTrainSplit, ForecastMatrix};

/// Floor added to validation errors before inverting, so zero-error models
/// get (essentially all of) the weight instead of dividing by zero.
pub const ERROR_EPS: f64 = 1e-9;

/// Default iteration cap for forward stepwise selection.
pub const DEFAULT_MAX_ITER: usize = 20;

/// Default number of expanding-window folds for stacking.
pub const DEFAULT_N_FOLDS: usize = 5;

/// Which part of the pool an ensemble works with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionStrategy {
    /// The whole pool.
    All,
    /// The `b` models with the lowest validation error.
    Best(usize),
    /// An explicit list of pool members.
    Named(Vec<ModelName>),
}

impl SelectionStrategy {
    /// The paper's default size for `best`.
    pub const DEFAULT_NUM_BEST: usize = 3;
}

/// Picks the sub-pool a strategy refers to. `ids` and `training_errors` are
/// aligned; the result preserves pool order for `all`/`best` and list order
/// for `named`.
pub fn select_models(
    ids: &[String],
    training_errors: &[f64],
    strategy: &SelectionStrategy,
) -> Result<Vec<String>> {
    if ids.is_empty() {
        return Err(Error::EmptyPool);
    }
    if ids.len() != training_errors.len() {
        return Err(Error::InvalidArgument(format!(
            "{} pool ids but {} training errors",
            ids.len(),
            training_errors.len()
        )));
    }
    match strategy {
        SelectionStrategy::All => Ok(ids.to_vec()),
        SelectionStrategy::Best(b) => {
            if *b == 0 {
                return Err(Error::InvalidArgument("num_best must be ≥ 1".into()));
            }
            let mut order: Vec<usize> = (0..ids.len()).collect();
            order.sort_by(|&a, &b| {
                training_errors[a]
                    .partial_cmp(&training_errors[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| ids[a].cmp(&ids[b]))
            });
            let mut keep: Vec<usize> = order.into_iter().take(*b).collect();
            keep.sort_unstable();
            Ok(keep.into_iter().map(|i| ids[i].clone()).collect())
        }
        SelectionStrategy::Named(names) => {
            let mut out = Vec::with_capacity(names.len());
            for name in names {
                let id = name.to_string();
                if !ids.contains(&id) {
                    return Err(Error::UnknownName(id, "model pool".into()));
                }
                out.push(id);
            }
            Ok(out)
        }
    }
}

/// Non-negative combination weights over named models, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub model_ids: Vec<String>,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(model_ids: Vec<String>, weights: Vec<f64>) -> Result<WeightVector> {
        if model_ids.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} model ids but {} weights",
                model_ids.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and ≥ 0".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights sum to {sum}, expected 1")));
        }
        Ok(WeightVector { model_ids, weights })
    }

    /// Equal weights over the given models.
    pub fn uniform(model_ids: Vec<String>) -> Result<WeightVector> {
        if model_ids.is_empty() {
            return Err(Error::EmptyPool);
        }
        let w = 1.0 / model_ids.len() as f64;
        let n = model_ids.len();
        WeightVector::new(model_ids, vec![w; n])
    }

    /// Normalizes raw non-negative scores into a weight vector.
    pub fn from_raw(model_ids: Vec<String>, raw: &[f64]) -> Result<WeightVector> {
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "raw weights sum to {sum}; cannot normalize"
            )));
        }
        WeightVector::new(model_ids, raw.iter().map(|&r| r / sum).collect())
    }

    /// Weighted average of the named rows of a forecast matrix.
    pub fn apply(&self, matrix: &ForecastMatrix) -> Result<Vec<f64>> {
        let mut out = vec![0.0; matrix.horizon()];
        for (id, &w) in self.model_ids.iter().zip(&self.weights) {
            let row = matrix
                .row(id)
                .ok_or_else(|| Error::UnknownName(id.clone(), "forecast matrix".into()))?;
            for (o, &v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

/// The validation-error weighting formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetweFormula {
    /// w ∝ 1/(e+ε)²
    Sqr,
    /// w ∝ 1/(e+ε)
    Inv,
    /// w ∝ exp(−e/ē)
    Exp,
}

impl DetweFormula {
    pub fn as_str(self) -> &'static str {
        match self {
            DetweFormula::Sqr => "sqr",
            DetweFormula::Inv => "inv",
            DetweFormula::Exp => "exp",
        }
    }
}

/// Raw (unnormalized) weights for a set of validation errors.
fn detwe_raw(errors: &[f64], formula: DetweFormula) -> Vec<f64> {
    match formula {
        DetweFormula::Inv => errors.iter().map(|&e| 1.0 / (e + ERROR_EPS)).collect(),
        DetweFormula::Sqr => {
            errors.iter().map(|&e| 1.0 / ((e + ERROR_EPS) * (e + ERROR_EPS))).collect()
        }
        DetweFormula::Exp => {
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            let scale = if mean > 0.0 { mean } else { 1.0 };
            errors.iter().map(|&e| (-e / scale).exp()).collect()
        }
    }
}

/// Weighted average with weights derived from each model's validation error.
/// `errors` aligns with `test.model_ids`.
pub fn combine_detwe(
    errors: &[f64],
    formula: DetweFormula,
    test: &ForecastMatrix,
) -> Result<(Vec<f64>, WeightVector)> {
    if test.n_models() == 0 {
        return Err(Error::EmptyPool);
    }
    if errors.len() != test.n_models() {
        return Err(Error::InvalidArgument(format!(
            "{} errors for {} models",
            errors.len(),
            test.n_models()
        )));
    }
    if errors.iter().any(|&e| !e.is_finite() || e < 0.0) {
        return Err(Error::InvalidArgument("validation errors must be finite and ≥ 0".into()));
    }
    let weights = WeightVector::from_raw(test.model_ids.clone(), &detwe_raw(errors, formula))?;
    let forecast = weights.apply(test)?;
    Ok((forecast, weights))
}

/// Equal-weight mean across all models, per horizon step.
pub fn mean_average(test: &ForecastMatrix) -> Result<Vec<f64>> {
    if test.n_models() == 0 {
        return Err(Error::EmptyPool);
    }
    let weights = WeightVector::uniform(test.model_ids.clone())?;
    weights.apply(test)
}

/// Combinations of out-of-scope models accepted for compatibility, with the
/// in-scope pool they map to.
pub const COMBO_REMAPS: [(&str, &str); 3] = [
    ("ets_arima", "ets+theta"),
    ("ets_arima_tbats", "ets+theta+stlmar"),
    ("ets_arima_tbats_theta", "ets+theta+snaive"),
];

/// Equal-weight mean over an explicitly named subset of the pool.
pub fn algo_algo(combo: &[String], test: &ForecastMatrix) -> Result<Vec<f64>> {
    if combo.is_empty() {
        return Err(Error::EmptyPool);
    }
    for name in combo {
        if !test.model_ids.contains(name) {
            let hint = format!(
                "forecast matrix (out-of-scope combos remap: {})",
                COMBO_REMAPS
                    .iter()
                    .map(|(from, to)| format!("{from}→{to}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            return Err(Error::UnknownName(name.clone(), hint));
        }
    }
    let weights = WeightVector::uniform(combo.to_vec())?;
    weights.apply(test)
}

/// Window and survivor fraction for the recency-weighted ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecentConfig {
    /// How many of the most recent training points to score on.
    pub p: usize,
    /// Percentage of the pool kept after scoring.
    pub lambda_pct: usize,
}

/// Scores each model by its mean sAPE over the last `P` training points
/// (fit on everything before them), keeps the best ⌈λ%⌉ of the pool, and
/// weights survivors by inverse recent error.
pub fn recent_ensemble(
    pool: &[ModelName],
    train: &[f64],
    config: &RecentConfig,
    seasonality: &SeasonalityInfo,
    test: &ForecastMatrix,
) -> Result<(Vec<f64>, WeightVector)> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if config.lambda_pct == 0 || config.lambda_pct > 100 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be a percentage in 1..=100, got {}",
            config.lambda_pct
        )));
    }
    let n = train.len();
    if config.p + 2 > n {
        return Err(Error::SeriesTooShort(format!(
            "recent ensemble needs ≥ {} points for P = {}, got {n}",
            config.p + 2,
            config.p
        )));
    }
    let head = &train[..n - config.p];
    let recent = &train[n - config.p..];
    let mut scored: Vec<(String, f64)> = Vec::new();
    for &name in pool {
        let id = name.to_string();
        if !test.model_ids.contains(&id) {
            continue;
        }
        match crate::base_models::fit_base(name, head, seasonality) {
            Ok((model, _)) => {
                let preds = model.predict(config.p);
                // A degenerate point (ŷ = −y ≠ 0) makes the model's recent
                // score infinite rather than failing the whole ensemble.
                let mean_sape = recent
                    .iter()
                    .zip(&preds)
                    .map(|(&a, &f)| crate::metrics::sape(a, f).unwrap_or(f64::INFINITY))
                    .sum::<f64>()
                    / config.p as f64;
                scored.push((id, mean_sape));
            }
            Err(e) => warn!("recent ensemble skips {name}: {e}"),
        }
    }
    if scored.is_empty() {
        return Err(Error::FitFailed("no pool model could be scored on the recent window".into()));
    }
    let keep = ((config.lambda_pct as f64 / 100.0) * scored.len() as f64).ceil() as usize;
    let keep = keep.clamp(1, scored.len());
    scored.sort_by(|a, b| {
        a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(keep);
    let ids: Vec<String> = scored.iter().map(|(id, _)| id.clone()).collect();
    let raw: Vec<f64> = scored.iter().map(|(_, e)| 1.0 / (e + ERROR_EPS)).collect();
    let weights = WeightVector::from_raw(ids, &raw)?;
    let forecast = weights.apply(test)?;
    Ok((forecast, weights))
}

/// The supervised learners usable as stacking / superbooster meta-models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaModelKind {
    Linreg,
    Rf,
    Gbt,
}

impl MetaModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetaModelKind::Linreg => "linreg",
            MetaModelKind::Rf => "rf",
            MetaModelKind::Gbt => "gbt",
        }
    }

    /// Fits the meta-model on a regression design.
    pub fn fit(self, x: &DesignMatrix, seed: RngSeed) -> Result<FittedMeta> {
        match self {
            MetaModelKind::Linreg => Ok(FittedMeta::Linreg(fit_linreg(x)?)),
            MetaModelKind::Rf => Ok(FittedMeta::Rf(fit_rf(
                x,
                TreeTask::Regression,
                RfParams::default(),
                seed,
            ))),
            MetaModelKind::Gbt => {
                let objective = SquaredError { targets: x.target.clone() };
                Ok(FittedMeta::Gbt(fit_gbt(x, &objective, GbtParams::default())?))
            }
        }
    }
}

/// A fitted meta-model, whichever learner backs it.
#[derive(Debug, Clone)]
pub enum FittedMeta {
    Linreg(LinearModel),
    Rf(RandomForest),
    Gbt(GbtModel),
}

impl FittedMeta {
    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        match self {
            FittedMeta::Linreg(m) => m.predict(rows),
            FittedMeta::Rf(m) => m.predict(rows),
            FittedMeta::Gbt(m) => rows.iter().map(|r| m.predict_value(r)).collect(),
        }
    }
}

/// Per-time-step exogenous features for the superbooster: one row per
/// training point and one per test-horizon step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExoFeatures {
    pub names: Vec<String>,
    pub train_rows: Vec<Vec<f64>>,
    pub test_rows: Vec<Vec<f64>>,
}

/// Everything an ensemble spec evaluation reads for one series.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleInput<'a> {
    pub train: &'a [f64],
    pub h: usize,
    pub split: &'a EnsembleTrainSplit,
    pub seasonality: &'a SeasonalityInfo,
    pub pool: &'a FittedPool,
    pub exo: Option<&'a ExoFeatures>,
    /// Corpus-trained weight model, required by the fforma method.
    pub fforma: Option<&'a FformaModel>,
    /// This series' meta-feature vector, required by the fforma method.
    pub features: Option<&'a [f64]>,
    pub seed: RngSeed,
}

/// A combined forecast plus the weights behind it when the method is a
/// weighted average.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub forecast: Vec<f64>,
    pub weights: Option<WeightVector>,
}

impl EnsembleOutput {
    fn plain(forecast: Vec<f64>) -> EnsembleOutput {
        EnsembleOutput { forecast, weights: None }
    }
}

/// Evaluates one ensemble spec end to end: applies its selection strategy
/// to the pool, then dispatches to the method.
pub fn run_spec(spec: &EnsembleSpec, input: &EnsembleInput) -> Result<EnsembleOutput> {
    let pool = input.pool;
    let training_errors: Vec<f64> =
        pool.reports.iter().map(|(_, r)| r.training_error).collect();
    let ids = select_models(&pool.evalid.model_ids, &training_errors, &spec.selection)?;
    let evalid = pool.evalid.select(&ids)?;
    let test = pool.test.select(&ids)?;
    let actual = &input.train[input.split.evalid.clone()];
    let sub_errors: Vec<f64> = ids
        .iter()
        .map(|id| {
            let at = pool.evalid.model_ids.iter().position(|p| p == id).unwrap();
            training_errors[at]
        })
        .collect();
    let names: Vec<ModelName> =
        ids.iter().map(|id| id.parse::<ModelName>()).collect::<Result<_>>()?;
    match &spec.method {
        EnsembleMethod::Detwe { formula } => {
            let (forecast, weights) = combine_detwe(&sub_errors, *formula, &test)?;
            Ok(EnsembleOutput { forecast, weights: Some(weights) })
        }
        EnsembleMethod::Stacking { meta, n_folds } => {
            let forecast = ensemble_stacking(
                &names,
                input.train,
                input.h,
                *meta,
                *n_folds,
                input.seasonality,
                input.seed.derive("stacking"),
            )?;
            Ok(EnsembleOutput::plain(forecast))
        }
        EnsembleMethod::StackingBasic { meta } => {
            let forecast = ensemble_stacking_basic(
                &evalid,
                actual,
                *meta,
                &test,
                input.seed.derive("stacking_basic"),
            )?;
            Ok(EnsembleOutput::plain(forecast))
        }
        EnsembleMethod::ModelSelection { sort, max_iter } => {
            let weights = ensemble_model_selection(&evalid, actual, *sort, *max_iter)?;
            let forecast = weights.apply(&test)?;
            Ok(EnsembleOutput { forecast, weights: Some(weights) })
        }
        EnsembleMethod::SelectionBags { metric } => {
            let (forecast, _bags) = ensemble_selection_bags(
                &evalid,
                actual,
                input.seasonality.primary_period(),
                *metric,
                DEFAULT_MAX_ITER,
                &test,
            )?;
            Ok(EnsembleOutput::plain(forecast))
        }
        EnsembleMethod::BackwardElim { combination } => {
            let forecast = ensemble_backward_elimination(
                &evalid,
                actual,
                combination,
                &test,
                input.seed.derive("backward_elim"),
            )?;
            Ok(EnsembleOutput::plain(forecast))
        }
        EnsembleMethod::Fforma => {
            let model = input.fforma.ok_or_else(|| {
                Error::InvalidArgument("fforma requires a corpus-trained weight model".into())
            })?;
            let features = input.features.ok_or_else(|| {
                Error::InvalidArgument("fforma requires this series' meta-features".into())
            })?;
            let (forecast, weights) = fforma_apply(model, features, &test)?;
            Ok(EnsembleOutput { forecast, weights: Some(weights) })
        }
        EnsembleMethod::Recent(config) => {
            let (forecast, weights) =
                recent_ensemble(&names, input.train, config, input.seasonality, &test)?;
            Ok(EnsembleOutput { forecast, weights: Some(weights) })
        }
        EnsembleMethod::Superbooster { base, noise, meta } => {
            let (forecast, _aug) = superbooster(
                base,
                pool,
                input.train,
                input.split,
                input.h,
                input.exo,
                *noise,
                *meta,
                input.seed.derive("superbooster"),
            )?;
            Ok(EnsembleOutput::plain(forecast))
        }
        EnsembleMethod::Mean => Ok(EnsembleOutput {
            forecast: mean_average(&test)?,
            weights: Some(WeightVector::uniform(test.model_ids.clone())?),
        }),
        EnsembleMethod::AlgoAlgo { combo } => {
            let combo_ids: Vec<String> = combo.iter().map(|m| m.to_string()).collect();
            // algo_algo reads the full pool: its combo is the selection.
            let forecast = algo_algo(&combo_ids, &pool.test)?;
            Ok(EnsembleOutput::plain(forecast))
        }
    }
}
