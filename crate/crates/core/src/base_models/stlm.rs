//! Seasonal decomposition plus autoregression: classical additive
//! decomposition (moving-average trend, period-wise seasonal means) followed
//! by a least-squares AR(p) on the seasonally adjusted series, with the
//! order chosen by AICc.

use serde::{Deserialize, Serialize};

use super::decomp::{seasonal_indices, SeasonalIndices};
use crate::error::{Error, Result};
use crate::learners::{fit_linreg, DesignMatrix};
use crate::preprocess::SeasonalMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlmArState {
    pub seasonal: SeasonalIndices,
    pub intercept: f64,
    /// AR coefficients φ_1..φ_p (lag 1 first).
    pub coefficients: Vec<f64>,
    /// Last p seasonally adjusted values, most recent last.
    pub tail: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlmArFit {
    pub state: StlmArState,
    pub one_step_errors: Vec<f64>,
    /// Residual variance of the selected AR fit.
    pub sigma2: f64,
}

fn ar_design(sa: &[f64], p: usize) -> Result<DesignMatrix> {
    let names = (1..=p).map(|l| format!("lag_{l}")).collect();
    let mut rows = Vec::with_capacity(sa.len() - p);
    let mut target = Vec::with_capacity(sa.len() - p);
    for t in p..sa.len() {
        rows.push((1..=p).map(|l| sa[t - l]).collect());
        target.push(sa[t]);
    }
    DesignMatrix::new(names, rows, target)
}

pub fn fit_stlmar(train: &[f64], m: Option<usize>) -> Result<StlmArFit> {
    let m =
        m.ok_or_else(|| Error::NoSeasonality("stlmar requires a detected seasonal period".into()))?;
    if m < 2 {
        return Err(Error::InvalidArgument(format!("stlmar needs period ≥ 2, got {m}")));
    }
    let n = train.len();
    if n < 3 * m {
        return Err(Error::SeriesTooShort(format!(
            "stlmar needs ≥ {} points for period {m}, got {n}",
            3 * m
        )));
    }
    let seasonal = seasonal_indices(train, m, SeasonalMode::Additive)?;
    let sa = seasonal.adjust(train);
    let max_p = (n / 5).clamp(1, 10);
    // (aicc, p, intercept, sigma2, coefficients, one-step errors)
    type Candidate = (f64, usize, f64, f64, Vec<f64>, Vec<f64>);
    let mut best: Option<Candidate> = None;
    for p in 1..=max_p {
        if sa.len() <= p + 2 {
            break;
        }
        let design = match ar_design(&sa, p) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let model = match fit_linreg(&design) {
            Ok(model) => model,
            Err(_) => continue,
        };
        let preds = model.predict(&design.rows);
        let errors: Vec<f64> =
            design.target.iter().zip(&preds).map(|(y, f)| y - f).collect();
        let sse: f64 = errors.iter().map(|e| e * e).sum();
        let n_eff = errors.len() as f64;
        let q = (p + 1) as f64;
        if n_eff <= q + 1.0 {
            continue;
        }
        let aicc = n_eff * (sse / n_eff).max(1e-300).ln() + 2.0 * q * n_eff / (n_eff - q - 1.0);
        if best.as_ref().is_none_or(|b| aicc < b.0) {
            let sigma2 = sse / n_eff;
            best = Some((aicc, p, model.intercept, sigma2, model.coefficients, errors));
        }
    }
    let (_, p, intercept, sigma2, coefficients, one_step_errors) =
        best.ok_or_else(|| Error::FitFailed("no AR order could be fit".into()))?;
    let tail = sa[sa.len() - p..].to_vec();
    Ok(StlmArFit {
        state: StlmArState { seasonal, intercept, coefficients, tail, n },
        one_step_errors,
        sigma2,
    })
}

pub fn predict_stlmar(state: &StlmArState, h: usize) -> Vec<f64> {
    let p = state.coefficients.len();
    let mut window = state.tail.clone();
    let mut adj = Vec::with_capacity(h);
    for _ in 0..h {
        let mut v = state.intercept;
        for (l, &phi) in state.coefficients.iter().enumerate() {
            v += phi * window[window.len() - 1 - l];
        }
        adj.push(v);
        window.push(v);
        if window.len() > p {
            window.remove(0);
        }
    }
    state.seasonal.restore(&adj, state.n)
}
