//! Classical two-theta-line forecaster: equal-weight combination of the
//! extrapolated θ=0 line (the OLS trend) and a simple-exponential-smoothing
//! forecast of the θ=2 line, with optional seasonal adjustment.

use serde::{Deserialize, Serialize};

use super::decomp::{seasonal_indices, SeasonalIndices};
use super::smoothing::fit_ses;
use crate::error::{Error, Result};
use crate::preprocess::SeasonalMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaState {
    pub seasonal: Option<SeasonalIndices>,
    pub intercept: f64,
    pub slope: f64,
    pub ses_level: f64,
    pub ses_alpha: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub state: ThetaState,
    pub one_step_errors: Vec<f64>,
}

/// OLS of `y` on time index 0..n−1, returning (intercept, slope).
fn ols_line(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let t_mean = (y.len() as f64 - 1.0) / 2.0;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, &v) in y.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - y_mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (y_mean - slope * t_mean, slope)
}

pub fn fit_theta(train: &[f64], m: Option<usize>, mode: Option<SeasonalMode>) -> Result<ThetaFit> {
    let n = train.len();
    if n < 4 {
        return Err(Error::SeriesTooShort(format!("theta needs ≥ 4 points, got {n}")));
    }
    let seasonal = match m {
        Some(period) if period >= 2 && n >= 2 * period => {
            let mode = mode.unwrap_or(if train.iter().all(|&v| v > 0.0) {
                SeasonalMode::Multiplicative
            } else {
                SeasonalMode::Additive
            });
            Some(seasonal_indices(train, period, mode)?)
        }
        _ => None,
    };
    let adjusted: Vec<f64> = match &seasonal {
        Some(idx) => idx.adjust(train),
        None => train.to_vec(),
    };
    let (intercept, slope) = ols_line(&adjusted);
    // θ=2 line doubles the local curvature around the trend.
    let theta2: Vec<f64> = adjusted
        .iter()
        .enumerate()
        .map(|(t, &v)| 2.0 * v - (intercept + slope * t as f64))
        .collect();
    let ses = fit_ses(&theta2)?;
    // One-step in-sample record: combine the line with the SES one-step
    // prediction of the θ=2 series, then restore seasonality pointwise.
    let mut one_step_errors = Vec::with_capacity(n - 1);
    for (i, &e2) in ses.one_step_errors.iter().enumerate() {
        let t = i + 1;
        let ses_pred = theta2[t] - e2;
        let line = intercept + slope * t as f64;
        let adj_pred = 0.5 * (line + ses_pred);
        let pred = match &seasonal {
            Some(idx) => idx.restore(&[adj_pred], t)[0],
            None => adj_pred,
        };
        one_step_errors.push(train[t] - pred);
    }
    Ok(ThetaFit {
        state: ThetaState {
            seasonal,
            intercept,
            slope,
            ses_level: ses.level,
            ses_alpha: ses.params.alpha,
            n,
        },
        one_step_errors,
    })
}

pub fn predict_theta(state: &ThetaState, h: usize) -> Vec<f64> {
    let adj: Vec<f64> = (1..=h)
        .map(|k| {
            let line = state.intercept + state.slope * (state.n + k - 1) as f64;
            0.5 * (line + state.ses_level)
        })
        .collect();
    match &state.seasonal {
        Some(idx) => idx.restore(&adj, state.n),
        None => adj,
    }
}
