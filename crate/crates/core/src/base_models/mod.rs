//! The pool of base forecasters: simple benchmarks (naive, seasonal naive,
//! random walk with drift, mean), the theta method, automatic exponential
//! smoothing, and seasonal decomposition with AR errors. Every model fits to
//! a serializable state and predicts deterministically from it.

mod decomp;
mod smoothing;
mod stlm;
mod theta;

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

pub use decomp::{seasonal_indices, SeasonalIndices};
pub use smoothing::{fit_ets, fit_ses, EtsFit, EtsVariant, SmoothingParams};
pub use stlm::{fit_stlmar, predict_stlmar, StlmArFit, StlmArState};
pub use theta::{fit_theta, predict_theta, ThetaFit, ThetaState};

use crate::error::{Error, Result};
use crate::preprocess::SeasonalityInfo;
use crate::series::{EnsembleTrainSplit, ForecastMatrix};

/// The fixed roster of base algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Naive,
    Snaive,
    Rwdrift,
    Theta,
    Ets,
    Stlmar,
    Meanf,
}

impl ModelName {
    pub const ALL: [ModelName; 7] = [
        ModelName::Naive,
        ModelName::Snaive,
        ModelName::Rwdrift,
        ModelName::Theta,
        ModelName::Ets,
        ModelName::Stlmar,
        ModelName::Meanf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Naive => "naive",
            ModelName::Snaive => "snaive",
            ModelName::Rwdrift => "rwdrift",
            ModelName::Theta => "theta",
            ModelName::Ets => "ets",
            ModelName::Stlmar => "stlmar",
            ModelName::Meanf => "meanf",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelName> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownName(s.into(), "base model".into()))
    }
}

/// Serializable fitted parameters, one variant per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelState {
    Naive { last: f64 },
    Snaive { period: usize, tail: Vec<f64> },
    Rwdrift { last: f64, drift: f64 },
    Meanf { mean: f64 },
    Theta(ThetaState),
    Ets(EtsFit),
    Stlmar(StlmArState),
}

/// A fitted base model ready to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseForecaster {
    pub name: ModelName,
    pub fitted_state: ModelState,
    pub seasonality: SeasonalityInfo,
}

impl BaseForecaster {
    /// Deterministic h-step forecast from the fitted state.
    pub fn predict(&self, h: usize) -> Vec<f64> {
        match &self.fitted_state {
            ModelState::Naive { last } => vec![*last; h],
            ModelState::Snaive { tail, .. } => {
                (0..h).map(|k| tail[k % tail.len()]).collect()
            }
            ModelState::Rwdrift { last, drift } => {
                (1..=h).map(|k| last + k as f64 * drift).collect()
            }
            ModelState::Meanf { mean } => vec![*mean; h],
            ModelState::Theta(state) => predict_theta(state, h),
            ModelState::Ets(fit) => fit.forecast(h),
            ModelState::Stlmar(state) => predict_stlmar(state, h),
        }
    }
}

/// Training summary recorded for every fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub in_sample_one_step_errors: Vec<f64>,
    /// Customized sMAPE of the etrain-fit model on the evalid window.
    pub training_error: f64,
}

fn require_len(train: &[f64], min: usize, what: &str) -> Result<()> {
    if train.len() < min {
        return Err(Error::SeriesTooShort(format!(
            "{what} needs ≥ {min} points, got {}",
            train.len()
        )));
    }
    Ok(())
}

/// Fits one base model, returning the forecaster plus its in-sample
/// one-step errors on the training slice.
pub fn fit_base(
    name: ModelName,
    train: &[f64],
    seasonality: &SeasonalityInfo,
) -> Result<(BaseForecaster, Vec<f64>)> {
    let m = seasonality.primary_period();
    let (state, errors) = match name {
        ModelName::Naive => {
            require_len(train, 1, "naive")?;
            let errors = train.windows(2).map(|w| w[1] - w[0]).collect();
            (ModelState::Naive { last: *train.last().unwrap() }, errors)
        }
        ModelName::Snaive => {
            let period = m.unwrap_or(1).max(1);
            if period >= 2 && train.len() < period {
                return Err(Error::PeriodTooLong { m: period, len: train.len() });
            }
            require_len(train, 1, "snaive")?;
            let period = period.min(train.len());
            let tail = train[train.len() - period..].to_vec();
            let errors = (period..train.len()).map(|t| train[t] - train[t - period]).collect();
            (ModelState::Snaive { period, tail }, errors)
        }
        ModelName::Rwdrift => {
            require_len(train, 2, "rwdrift")?;
            let last = *train.last().unwrap();
            let drift = (last - train[0]) / (train.len() - 1) as f64;
            let errors =
                (1..train.len()).map(|t| train[t] - (train[t - 1] + drift)).collect();
            (ModelState::Rwdrift { last, drift }, errors)
        }
        ModelName::Meanf => {
            require_len(train, 1, "meanf")?;
            let mean = train.iter().sum::<f64>() / train.len() as f64;
            let errors = train.iter().map(|&v| v - mean).collect();
            (ModelState::Meanf { mean }, errors)
        }
        ModelName::Theta => {
            let mode = seasonality.primary.map(|s| s.mode);
            let fit = fit_theta(train, m, mode)?;
            let errors = fit.one_step_errors.clone();
            (ModelState::Theta(fit.state), errors)
        }
        ModelName::Ets => {
            let fit = fit_ets(train, m)?;
            let errors = fit.one_step_errors.clone();
            (ModelState::Ets(fit), errors)
        }
        ModelName::Stlmar => {
            let fit = fit_stlmar(train, m)?;
            let errors = fit.one_step_errors.clone();
            (ModelState::Stlmar(fit.state), errors)
        }
    };
    if errors.iter().any(|e: &f64| !e.is_finite()) {
        return Err(Error::FitFailed(format!("{name} produced non-finite in-sample errors")));
    }
    Ok((BaseForecaster { name, fitted_state: state, seasonality: *seasonality }, errors))
}

/// All h values equal the last observation.
pub fn forecast_naive(train: &[f64], h: usize) -> Result<Vec<f64>> {
    let (model, _) = fit_base(ModelName::Naive, train, &SeasonalityInfo::default())?;
    Ok(model.predict(h))
}

/// Repeats the most recent seasonal cycle; m = 1 degenerates to naive.
pub fn forecast_snaive(train: &[f64], h: usize, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("snaive period must be ≥ 1".into()));
    }
    if m >= 2 && train.len() < m {
        return Err(Error::PeriodTooLong { m, len: train.len() });
    }
    require_len(train, 1, "snaive")?;
    let tail = train[train.len() - m.min(train.len())..].to_vec();
    Ok((0..h).map(|k| tail[k % tail.len()]).collect())
}

/// Extends the line through the first and last observations.
pub fn forecast_rwdrift(train: &[f64], h: usize) -> Result<Vec<f64>> {
    let (model, _) = fit_base(ModelName::Rwdrift, train, &SeasonalityInfo::default())?;
    Ok(model.predict(h))
}

/// Two-theta-line forecast with optional seasonal adjustment.
pub fn forecast_theta(train: &[f64], h: usize, m: Option<usize>) -> Result<Vec<f64>> {
    let fit = fit_theta(train, m, None)?;
    Ok(predict_theta(&fit.state, h))
}

/// Automatic exponential smoothing (lowest-AICc candidate).
pub fn forecast_ets(train: &[f64], h: usize, m: Option<usize>) -> Result<Vec<f64>> {
    let fit = fit_ets(train, m)?;
    Ok(fit.forecast(h))
}

/// Classical decomposition plus AR on the adjusted series.
pub fn forecast_stlmar(train: &[f64], h: usize, m: Option<usize>) -> Result<Vec<f64>> {
    let fit = fit_stlmar(train, m)?;
    Ok(predict_stlmar(&fit.state, h))
}

/// All h values equal the training mean.
pub fn forecast_meanf(train: &[f64], h: usize) -> Result<Vec<f64>> {
    let (model, _) = fit_base(ModelName::Meanf, train, &SeasonalityInfo::default())?;
    Ok(model.predict(h))
}

/// Everything `fit_all` produces for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPool {
    /// Predictions of the etrain-fit models over the evalid window.
    pub evalid: ForecastMatrix,
    /// Predictions of the full-train-fit models over the test horizon.
    pub test: ForecastMatrix,
    pub reports: Vec<(ModelName, FitReport)>,
    /// Full-train fitted states, for state-file serialization.
    pub models: Vec<BaseForecaster>,
    /// Models dropped with the reason, mirroring the logged warnings.
    pub dropped: Vec<(ModelName, String)>,
}

/// Fits the pool twice — once on etrain for validation forecasts, once on
/// the full training series for test forecasts. Models that fail either fit
/// are dropped with a logged warning; the run aborts only if nothing
/// survives a non-empty request.
pub fn fit_all(
    pool: &[ModelName],
    train: &[f64],
    split: &EnsembleTrainSplit,
    seasonality: &SeasonalityInfo,
    h: usize,
) -> Result<FittedPool> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut names: Vec<ModelName> = Vec::new();
    for &name in pool {
        if !names.contains(&name) {
            names.push(name);
        }
    }
    let etrain = &train[split.etrain.clone()];
    let evalid_actual = &train[split.evalid.clone()];
    let mut ids = Vec::new();
    let mut evalid_rows = Vec::new();
    let mut test_rows = Vec::new();
    let mut reports = Vec::new();
    let mut models = Vec::new();
    let mut dropped = Vec::new();
    for name in names {
        let attempt = (|| -> Result<(Vec<f64>, Vec<f64>, FitReport, BaseForecaster)> {
            let (model_e, in_sample) = fit_base(name, etrain, seasonality)?;
            let pe = model_e.predict(evalid_actual.len());
            if pe.iter().any(|v| !v.is_finite()) {
                return Err(Error::FitFailed(format!("{name} evalid forecast not finite")));
            }
            let training_error = match crate::metrics::smape_custom(evalid_actual, &pe) {
                Ok(v) => v,
                Err(Error::ZeroDenominator) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let (model_f, _) = fit_base(name, train, seasonality)?;
            let pf = model_f.predict(h);
            if pf.iter().any(|v| !v.is_finite()) {
                return Err(Error::FitFailed(format!("{name} test forecast not finite")));
            }
            let report = FitReport { in_sample_one_step_errors: in_sample, training_error };
            Ok((pe, pf, report, model_f))
        })();
        match attempt {
            Ok((pe, pf, report, model)) => {
                ids.push(name.to_string());
                evalid_rows.push(pe);
                test_rows.push(pf);
                reports.push((name, report));
                models.push(model);
            }
            Err(e) => {
                warn!("dropping base model {name}: {e}");
                dropped.push((name, e.to_string()));
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::FitFailed("every base model failed to fit".into()));
    }
    let evalid = ForecastMatrix::new(ids.clone(), evalid_rows, split.evalid.clone().collect())?;
    let test_index = (train.len()..train.len() + h).collect();
    let test = ForecastMatrix::new(ids, test_rows, test_index)?;
    Ok(FittedPool { evalid, test, reports, models, dropped })
}
