//! Exponential-smoothing family: SES, Holt, damped Holt, and additive /
//! multiplicative Holt-Winters, with candidate selection by an AICc proxy
//! over one-step in-sample errors. Smoothing parameters are optimized by
//! coordinate search over a 0.05-step grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The candidate models scored during automatic selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtsVariant {
    Ses,
    Holt,
    DampedHolt,
    HwAdditive,
    HwMultiplicative,
}

impl EtsVariant {
    pub fn is_trend_capable(self) -> bool {
        !matches!(self, EtsVariant::Ses)
    }

    fn n_smoothing_params(self) -> usize {
        match self {
            EtsVariant::Ses => 1,
            EtsVariant::Holt => 2,
            EtsVariant::DampedHolt => 3,
            EtsVariant::HwAdditive | EtsVariant::HwMultiplicative => 3,
        }
    }
}

/// Smoothing parameters; unused entries stay at their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl Default for SmoothingParams {
    fn default() -> SmoothingParams {
        SmoothingParams { alpha: 0.5, beta: 0.1, gamma: 0.1, phi: 0.9 }
    }
}

/// End state of a smoothing recursion plus its in-sample record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsFit {
    pub variant: EtsVariant,
    pub params: SmoothingParams,
    pub level: f64,
    pub trend: f64,
    /// Seasonal states, slot `t % m`; empty for nonseasonal variants.
    pub seasonal: Vec<f64>,
    pub m: usize,
    /// Train length, needed to place forecast seasonal positions.
    pub n: usize,
    pub one_step_errors: Vec<f64>,
    pub aicc: f64,
}

impl EtsFit {
    /// h-step forecast from the fitted end state.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        (1..=h)
            .map(|k| {
                let kf = k as f64;
                match self.variant {
                    EtsVariant::Ses => self.level,
                    EtsVariant::Holt => self.level + kf * self.trend,
                    EtsVariant::DampedHolt => {
                        let phi = self.params.phi;
                        // Σ_{i=1..k} φ^i = φ(1−φ^k)/(1−φ)
                        let damp = phi * (1.0 - phi.powi(k as i32)) / (1.0 - phi);
                        self.level + damp * self.trend
                    }
                    EtsVariant::HwAdditive => {
                        self.level + kf * self.trend + self.seasonal[(self.n + k - 1) % self.m]
                    }
                    EtsVariant::HwMultiplicative => {
                        (self.level + kf * self.trend) * self.seasonal[(self.n + k - 1) % self.m]
                    }
                }
            })
            .collect()
    }
}

struct RunOut {
    level: f64,
    trend: f64,
    seasonal: Vec<f64>,
    errors: Vec<f64>,
    sse: f64,
}

/// Runs one smoothing recursion over `y`; `None` when the variant cannot be
/// evaluated (multiplicative states hitting zero, too-short series).
fn run(y: &[f64], variant: EtsVariant, m: usize, p: SmoothingParams) -> Option<RunOut> {
    let n = y.len();
    let (alpha, beta, gamma, phi) = (p.alpha, p.beta, p.gamma, p.phi);
    match variant {
        EtsVariant::Ses | EtsVariant::Holt | EtsVariant::DampedHolt => {
            if n < 2 {
                return None;
            }
            let mut level = y[0];
            let mut trend = if variant == EtsVariant::Ses { 0.0 } else { y[1] - y[0] };
            let damp = if variant == EtsVariant::DampedHolt { phi } else { 1.0 };
            let mut errors = Vec::with_capacity(n - 1);
            let mut sse = 0.0;
            for &obs in &y[1..] {
                let pred = match variant {
                    EtsVariant::Ses => level,
                    _ => level + damp * trend,
                };
                let e = obs - pred;
                errors.push(e);
                sse += e * e;
                let new_level = match variant {
                    EtsVariant::Ses => alpha * obs + (1.0 - alpha) * level,
                    _ => alpha * obs + (1.0 - alpha) * (level + damp * trend),
                };
                if variant != EtsVariant::Ses {
                    trend = beta * (new_level - level) + (1.0 - beta) * damp * trend;
                }
                level = new_level;
            }
            Some(RunOut { level, trend, seasonal: Vec::new(), errors, sse })
        }
        EtsVariant::HwAdditive | EtsVariant::HwMultiplicative => {
            if m < 2 || n < 2 * m {
                return None;
            }
            let mult = variant == EtsVariant::HwMultiplicative;
            if mult && y.iter().any(|&v| v <= 0.0) {
                return None;
            }
            let first: f64 = y[..m].iter().sum::<f64>() / m as f64;
            let second: f64 = y[m..2 * m].iter().sum::<f64>() / m as f64;
            let mut level = first;
            let mut trend = (second - first) / m as f64;
            if mult && level <= 0.0 {
                return None;
            }
            let mut seasonal: Vec<f64> = if mult {
                y[..m].iter().map(|&v| v / level).collect()
            } else {
                y[..m].iter().map(|&v| v - level).collect()
            };
            let mut errors = Vec::with_capacity(n - m);
            let mut sse = 0.0;
            for (t, &obs) in y.iter().enumerate().skip(m) {
                let slot = t % m;
                let pred = if mult {
                    (level + trend) * seasonal[slot]
                } else {
                    level + trend + seasonal[slot]
                };
                let e = obs - pred;
                errors.push(e);
                sse += e * e;
                let deseason = if mult {
                    if seasonal[slot].abs() < 1e-12 {
                        return None;
                    }
                    obs / seasonal[slot]
                } else {
                    obs - seasonal[slot]
                };
                let new_level = alpha * deseason + (1.0 - alpha) * (level + trend);
                trend = beta * (new_level - level) + (1.0 - beta) * trend;
                let season_obs = if mult {
                    if new_level.abs() < 1e-12 {
                        return None;
                    }
                    obs / new_level
                } else {
                    obs - new_level
                };
                seasonal[slot] = gamma * season_obs + (1.0 - gamma) * seasonal[slot];
                level = new_level;
                if !level.is_finite() || !trend.is_finite() {
                    return None;
                }
            }
            Some(RunOut { level, trend, seasonal, errors, sse })
        }
    }
}

const STEP_GRID: [f64; 20] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75,
    0.80, 0.85, 0.90, 0.95, 1.00,
];
const PHI_GRID: [f64; 5] = [0.75, 0.80, 0.85, 0.90, 0.95];

/// AICc proxy over one-step in-sample errors: n·ln(SSE/n) + 2p·n/(n−p−1),
/// where p counts smoothing parameters plus initial states.
fn aicc_proxy(sse: f64, n: usize, p: usize) -> Option<f64> {
    if n <= p + 1 {
        return None;
    }
    let nf = n as f64;
    let pf = p as f64;
    let mean_sse = (sse / nf).max(1e-300);
    Some(nf * mean_sse.ln() + 2.0 * pf * nf / (nf - pf - 1.0))
}

/// Coordinate grid search for the SSE-minimizing smoothing parameters.
fn fit_variant(y: &[f64], variant: EtsVariant, m: usize) -> Option<EtsFit> {
    let mut params = SmoothingParams::default();
    let uses_beta = !matches!(variant, EtsVariant::Ses);
    let uses_gamma = matches!(variant, EtsVariant::HwAdditive | EtsVariant::HwMultiplicative);
    let uses_phi = variant == EtsVariant::DampedHolt;
    let eval = |p: SmoothingParams| run(y, variant, m, p).map(|r| r.sse);
    let mut best_sse = eval(params)?;
    for _pass in 0..6 {
        let before = params;
        for dim in 0..4 {
            let grid: &[f64] = match dim {
                0 => &STEP_GRID,
                1 if uses_beta => &STEP_GRID,
                2 if uses_gamma => &STEP_GRID,
                3 if uses_phi => &PHI_GRID,
                _ => continue,
            };
            for &v in grid {
                let mut cand = params;
                match dim {
                    0 => cand.alpha = v,
                    1 => cand.beta = v,
                    2 => cand.gamma = v,
                    _ => cand.phi = v,
                }
                if let Some(sse) = eval(cand) {
                    if sse < best_sse - 1e-15 {
                        best_sse = sse;
                        params = cand;
                    }
                }
            }
        }
        if params == before {
            break;
        }
    }
    let out = run(y, variant, m, params)?;
    let n_init = match variant {
        EtsVariant::Ses => 1,
        EtsVariant::Holt | EtsVariant::DampedHolt => 2,
        _ => 2 + m,
    };
    let p_count = variant.n_smoothing_params() + n_init;
    let aicc = aicc_proxy(out.sse, out.errors.len(), p_count)?;
    Some(EtsFit {
        variant,
        params,
        level: out.level,
        trend: out.trend,
        seasonal: out.seasonal,
        m,
        n: y.len(),
        one_step_errors: out.errors,
        aicc,
    })
}

/// Simple exponential smoothing with a grid-optimized α; reused by theta.
pub fn fit_ses(y: &[f64]) -> Result<EtsFit> {
    if y.len() < 2 {
        return Err(Error::SeriesTooShort(format!("SES needs ≥ 2 points, got {}", y.len())));
    }
    fit_variant(y, EtsVariant::Ses, 0)
        .ok_or_else(|| Error::FitFailed("SES grid search produced no candidate".into()))
}

/// Automatic exponential smoothing: fits every admissible candidate and
/// keeps the lowest-AICc one. Multiplicative Holt-Winters is excluded when
/// any training value is ≤ 0; seasonal candidates need |train| ≥ 2m.
pub fn fit_ets(y: &[f64], m: Option<usize>) -> Result<EtsFit> {
    if y.len() < 4 {
        return Err(Error::SeriesTooShort(format!("ets needs ≥ 4 points, got {}", y.len())));
    }
    let mut candidates = vec![EtsVariant::Ses, EtsVariant::Holt, EtsVariant::DampedHolt];
    if let Some(m) = m {
        if m >= 2 && y.len() >= 2 * m {
            candidates.push(EtsVariant::HwAdditive);
            if y.iter().all(|&v| v > 0.0) {
                candidates.push(EtsVariant::HwMultiplicative);
            }
        }
    }
    let mut best: Option<EtsFit> = None;
    for variant in candidates {
        if let Some(fit) = fit_variant(y, variant, m.unwrap_or(0)) {
            if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
                best = Some(fit);
            }
        }
    }
    best.ok_or_else(|| Error::FitFailed("no exponential-smoothing candidate could be fit".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_forecast_constant() {
        let y = vec![5.0; 12];
        let fit = fit_ets(&y, None).unwrap();
        for v in fit.forecast(4) {
            assert!((v - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_series_selects_trend_variant() {
        let y: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let fit = fit_ets(&y, None).unwrap();
        assert!(fit.variant.is_trend_capable(), "selected {:?}", fit.variant);
        let f = fit.forecast(3);
        assert!((f[0] - 31.0).abs() < 0.5, "forecast {f:?}");
    }

    #[test]
    fn additive_seasonal_recovered() {
        let pattern = [4.0, -1.0, -2.0, -1.0];
        let y: Vec<f64> = (0..40).map(|t| 10.0 + pattern[t % 4]).collect();
        let fit = fit_ets(&y, Some(4)).unwrap();
        let f = fit.forecast(4);
        let truth: Vec<f64> = (40..44).map(|t| 10.0 + pattern[t % 4]).collect();
        let smape = crate::metrics::smape_custom(&truth, &f).unwrap();
        assert!(smape <= 1.0, "sMAPE {smape} forecast {f:?}");
    }

    #[test]
    fn ses_under_shift_is_equivariant() {
        let y = vec![3.0, 4.0, 2.5, 3.7, 4.2, 3.1, 3.3, 2.9, 4.4, 3.6];
        let shifted: Vec<f64> = y.iter().map(|&v| v + 100.0).collect();
        let a = fit_ses(&y).unwrap();
        let b = fit_ses(&shifted).unwrap();
        assert_eq!(a.params.alpha, b.params.alpha);
        for (u, v) in a.forecast(3).iter().zip(b.forecast(3)) {
            assert!((u + 100.0 - v).abs() < 1e-9);
        }
    }

    #[test]
    fn multiplicative_candidate_skipped_on_nonpositive_data() {
        let y: Vec<f64> = (0..24).map(|t| ((t % 4) as f64) - 1.0).collect();
        let fit = fit_ets(&y, Some(4)).unwrap();
        assert_ne!(fit.variant, EtsVariant::HwMultiplicative);
    }
}
