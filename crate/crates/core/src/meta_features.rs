//! Per-series meta-features feeding the meta-learner: twenty series
//! descriptors (trend, seasonality, autocorrelation, spectral, stability,
//! shape) plus six dataset-level attribute counts. Features that are
//! undefined on a series (zero variance, no seasonality, zero mean) are
//! imputed 0 and flagged through a paired `<name>_defined` column, so the
//! flattened row always has the same width.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_linreg, DesignMatrix};
use crate::preprocess::{ma_trend, periodogram, SeasonalityInfo};
use crate::series::{ExoValues, TimeSeries};

/// Version tag written into feature CSV headers; bump when the feature list
/// or any formula changes.
pub const FEATURE_SET_VERSION: &str = "tsmeta-v1";

pub const SERIES_FEATURES: [&str; 20] = [
    "length",
    "seasonal_period",
    "trend_strength",
    "seasonal_strength",
    "spectral_entropy",
    "acf1",
    "acf10_sumsq",
    "pacf5_sumsq",
    "diff1_acf1",
    "stability",
    "lumpiness",
    "crossing_points_rate",
    "flat_spots_rate",
    "linearity",
    "curvature",
    "residual_acf1",
    "entropy_of_diff",
    "nonlinearity_proxy",
    "hurst_proxy",
    "cv",
];

pub const GENERAL_FEATURES: [&str; 6] =
    ["nr_cat", "nr_bin", "nr_num", "nr_attr", "inst_to_attr", "num_to_cat"];

/// Named feature values; `None` marks a feature undefined on this series.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetaFeatureVector {
    entries: BTreeMap<String, Option<f64>>,
}

impl MetaFeatureVector {
    /// Stores a feature; non-finite values are demoted to undefined.
    pub fn set(&mut self, name: &str, value: Option<f64>) {
        let v = value.filter(|v| v.is_finite());
        self.entries.insert(name.to_string(), v);
    }

    /// The feature's value, or `None` when absent or undefined.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(name).copied().flatten()
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Folds another partial vector in; the other side wins on collisions.
    pub fn merge(mut self, other: MetaFeatureVector) -> MetaFeatureVector {
        self.entries.extend(other.entries);
        self
    }

    /// All feature names in canonical order (series then general).
    pub fn all_names() -> Vec<&'static str> {
        SERIES_FEATURES.iter().chain(GENERAL_FEATURES.iter()).copied().collect()
    }

    /// Flattened column names: each feature followed by its defined flag.
    pub fn row_header() -> Vec<String> {
        Self::all_names()
            .into_iter()
            .flat_map(|n| [n.to_string(), format!("{n}_defined")])
            .collect()
    }

    /// Flattened numeric row matching [`MetaFeatureVector::row_header`]:
    /// undefined or absent features contribute (0.0, 0.0).
    pub fn to_row(&self) -> Vec<f64> {
        Self::all_names()
            .into_iter()
            .flat_map(|n| match self.get(n) {
                Some(v) => [v, 1.0],
                None => [0.0, 0.0],
            })
            .collect()
    }
}

fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

fn variance(y: &[f64]) -> f64 {
    let m = mean(y);
    y.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / y.len() as f64
}

/// Zero-mean unit-variance copy, or `None` for a constant series.
fn standardize(y: &[f64]) -> Option<Vec<f64>> {
    let sd = variance(y).sqrt();
    if sd <= 0.0 {
        return None;
    }
    let m = mean(y);
    Some(y.iter().map(|&v| (v - m) / sd).collect())
}

/// Lag-k autocorrelation, or `None` for a constant series.
fn acf(y: &[f64], k: usize) -> Option<f64> {
    let n = y.len();
    if k >= n {
        return None;
    }
    let m = mean(y);
    let denom: f64 = y.iter().map(|&v| (v - m) * (v - m)).sum();
    if denom <= 0.0 {
        return None;
    }
    let num: f64 = (0..n - k).map(|t| (y[t] - m) * (y[t + k] - m)).sum();
    Some(num / denom)
}

/// Partial autocorrelations at lags 1..=k_max via Durbin–Levinson.
fn pacf(y: &[f64], k_max: usize) -> Option<Vec<f64>> {
    let rho: Vec<f64> = (1..=k_max).map(|k| acf(y, k)).collect::<Option<_>>()?;
    let mut phi = vec![vec![0.0; k_max + 1]; k_max + 1];
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k == 1 {
            phi[1][1] = rho[0];
        } else {
            let num = rho[k - 1] - (1..k).map(|j| phi[k - 1][j] * rho[k - 1 - j]).sum::<f64>();
            let den = 1.0 - (1..k).map(|j| phi[k - 1][j] * rho[j - 1]).sum::<f64>();
            if den.abs() < 1e-12 {
                return None;
            }
            phi[k][k] = num / den;
            for j in 1..k {
                phi[k][j] = phi[k - 1][j] - phi[k][k] * phi[k - 1][k - j];
            }
        }
        out.push(phi[k][k]);
    }
    Some(out)
}

/// Normalized Shannon entropy of the smoothed periodogram, in [0, 1].
/// A raw periodogram's i.i.d. exponential bins would cap white noise near
/// 0.93; a Daniell-style moving average (window 7, edge-truncated) brings
/// the flat-spectrum limit close to 1 while leaving spikes concentrated.
fn spectral_entropy(y: &[f64]) -> Option<f64> {
    let raw = periodogram(y);
    if raw.len() < 2 {
        return None;
    }
    let n = raw.len();
    let half = 3usize;
    let dens: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let total: f64 = dens.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let h: f64 = dens
        .iter()
        .filter(|&&d| d > 0.0)
        .map(|&d| {
            let p = d / total;
            -p * p.ln()
        })
        .sum();
    Some((h / (dens.len() as f64).ln()).clamp(0.0, 1.0))
}

/// Residuals of the least-squares line over the time index.
fn linear_residuals(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let tbar = (n - 1.0) / 2.0;
    let ybar = mean(y);
    let sxx: f64 = (0..y.len()).map(|t| (t as f64 - tbar) * (t as f64 - tbar)).sum();
    let sxy: f64 = y.iter().enumerate().map(|(t, &v)| (t as f64 - tbar) * (v - ybar)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    y.iter()
        .enumerate()
        .map(|(t, &v)| v - (ybar + slope * (t as f64 - tbar)))
        .collect()
}

/// Decomposition-based strengths: (trend, seasonal, remainder acf1).
/// The seasonal slot is `None` when no usable period is available.
fn decomposition_features(
    y: &[f64],
    m: Option<usize>,
) -> (Option<f64>, Option<f64>, Option<f64>) {
    if let Some(m) = m.filter(|&m| m >= 2 && y.len() >= 2 * m) {
        if let Some((trend, lo)) = ma_trend(y, m) {
            let detrended: Vec<f64> =
                trend.iter().enumerate().map(|(i, &t)| y[lo + i] - t).collect();
            let mut sums = vec![0.0; m];
            let mut counts = vec![0usize; m];
            for (i, &d) in detrended.iter().enumerate() {
                sums[(lo + i) % m] += d;
                counts[(lo + i) % m] += 1;
            }
            if !counts.contains(&0) {
                let idx: Vec<f64> =
                    sums.iter().zip(&counts).map(|(&s, &c)| s / c as f64).collect();
                let remainder: Vec<f64> = detrended
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| d - idx[(lo + i) % m])
                    .collect();
                let deseason: Vec<f64> =
                    trend.iter().zip(&remainder).map(|(&t, &r)| t + r).collect();
                let vr = variance(&remainder);
                let strength = |vtot: f64| {
                    if vtot > 0.0 {
                        Some((1.0 - vr / vtot).clamp(0.0, 1.0))
                    } else {
                        None
                    }
                };
                return (
                    strength(variance(&deseason)),
                    strength(variance(&detrended)),
                    acf(&remainder, 1),
                );
            }
        }
    }
    // Non-seasonal (or undecomposable) fallback: linear trend only.
    let residual = linear_residuals(y);
    let vy = variance(y);
    let trend = if vy > 0.0 {
        Some((1.0 - variance(&residual) / vy).clamp(0.0, 1.0))
    } else {
        None
    };
    (trend, None, acf(&residual, 1))
}

/// Variances of tiled means and tiled variances of the standardized series.
fn stability_lumpiness(y: &[f64], m: Option<usize>) -> (f64, f64) {
    let z = match standardize(y) {
        Some(z) => z,
        None => return (0.0, 0.0),
    };
    let w = m.filter(|&m| m >= 2).unwrap_or(10).min(z.len() / 2).max(2);
    let means: Vec<f64> = z.chunks_exact(w).map(mean).collect();
    let vars: Vec<f64> = z.chunks_exact(w).map(variance).collect();
    (variance(&means), variance(&vars))
}

/// Rate of median crossings over adjacent pairs.
fn crossing_points_rate(y: &[f64]) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let above: Vec<bool> = y.iter().map(|&v| v > med).collect();
    let crossings = above.windows(2).filter(|w| w[0] != w[1]).count();
    crossings as f64 / (y.len() - 1) as f64
}

/// Longest run within one of ten equal-width bins, as a fraction of length.
fn flat_spots_rate(y: &[f64]) -> f64 {
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return 1.0;
    }
    let bin = |v: f64| (((v - lo) / (hi - lo) * 10.0).floor() as usize).min(9);
    let mut longest = 1usize;
    let mut run = 1usize;
    for w in y.windows(2) {
        if bin(w[0]) == bin(w[1]) {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 1;
        }
    }
    longest as f64 / y.len() as f64
}

/// Linear and quadratic coefficients of the standardized series regressed on
/// orthogonalized polynomial time terms.
fn linearity_curvature(y: &[f64]) -> Option<(f64, f64)> {
    let z = standardize(y)?;
    let n = z.len();
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let t1 = standardize(&t)?;
    // Orthogonalize t² against the constant and linear terms.
    let t2raw: Vec<f64> = t1.iter().map(|&v| v * v).collect();
    let proj: f64 =
        t2raw.iter().zip(&t1).map(|(&a, &b)| a * b).sum::<f64>() / n as f64;
    let t2c: Vec<f64> = t2raw
        .iter()
        .zip(&t1)
        .map(|(&a, &b)| a - mean(&t2raw) - proj * b)
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<f64>();
    let linearity = dot(&z, &t1) / dot(&t1, &t1);
    let s22 = dot(&t2c, &t2c);
    let curvature = if s22 > 1e-12 { dot(&z, &t2c) / s22 } else { 0.0 };
    Some((linearity, curvature))
}

/// Fractional SSE reduction of a cubic lag-1 autoregression over a linear
/// one, on the standardized series. 0 = no nonlinear gain.
fn nonlinearity_proxy(y: &[f64]) -> Option<f64> {
    let z = standardize(y)?;
    let n = z.len();
    if n < 6 {
        return None;
    }
    let target: Vec<f64> = z[1..].to_vec();
    let lin_rows: Vec<Vec<f64>> = z[..n - 1].iter().map(|&v| vec![v]).collect();
    let cub_rows: Vec<Vec<f64>> =
        z[..n - 1].iter().map(|&v| vec![v, v * v, v * v * v]).collect();
    let sse = |rows: Vec<Vec<f64>>, names: Vec<String>| -> Option<f64> {
        let design = DesignMatrix::new(names, rows, target.clone()).ok()?;
        let model = fit_linreg(&design).ok()?;
        let preds = model.predict(&design.rows);
        Some(design.target.iter().zip(&preds).map(|(y, f)| (y - f) * (y - f)).sum())
    };
    let sse_lin = sse(lin_rows, vec!["z1".into()])?;
    let sse_cub = sse(cub_rows, vec!["z1".into(), "z2".into(), "z3".into()])?;
    if sse_lin <= 0.0 {
        return Some(0.0);
    }
    Some(((sse_lin - sse_cub) / sse_lin).clamp(0.0, 1.0))
}

/// Aggregated-variance Hurst estimate: slope of log block-mean variance
/// against log block size, mapped through H = 1 + slope/2 and clamped.
fn hurst_proxy(y: &[f64]) -> Option<f64> {
    let z = standardize(y)?;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for s in [1usize, 2, 4, 8] {
        if z.len() / s < 2 {
            break;
        }
        let v = variance(&z.chunks_exact(s).map(mean).collect::<Vec<f64>>());
        if v > 0.0 {
            points.push(((s as f64).ln(), v.ln()));
        }
    }
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let xbar = mean(&xs);
    let ybar = mean(&ys);
    let sxx: f64 = xs.iter().map(|&x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(&x, &y)| (x - xbar) * (y - ybar)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some((1.0 + 0.5 * sxy / sxx).clamp(0.0, 1.0))
}

/// Extracts the twenty series features. The seasonal period is taken from
/// the caller's detection result, not re-detected here.
pub fn extract_series_features(
    y: &[f64],
    seasonality: &SeasonalityInfo,
) -> Result<MetaFeatureVector> {
    if y.len() < 8 {
        return Err(Error::SeriesTooShort(format!(
            "meta-features need ≥ 8 points, got {}",
            y.len()
        )));
    }
    let m = seasonality.primary_period();
    let mut out = MetaFeatureVector::default();
    out.set("length", Some(y.len() as f64));
    out.set("seasonal_period", m.map(|m| m as f64));

    let (trend, seasonal, residual_acf1) = decomposition_features(y, m);
    out.set("trend_strength", trend);
    out.set("seasonal_strength", seasonal);
    out.set("residual_acf1", residual_acf1);

    out.set("spectral_entropy", spectral_entropy(y));
    out.set("acf1", acf(y, 1));
    let acf10: Option<f64> = (1..=10.min(y.len() - 2))
        .map(|k| acf(y, k).map(|r| r * r))
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum());
    out.set("acf10_sumsq", acf10);
    out.set(
        "pacf5_sumsq",
        pacf(y, 5.min(y.len() - 2)).map(|v| v.iter().map(|p| p * p).sum()),
    );

    let diff: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    out.set("diff1_acf1", acf(&diff, 1));
    out.set("entropy_of_diff", spectral_entropy(&diff));

    let (stability, lumpiness) = stability_lumpiness(y, m);
    out.set("stability", Some(stability));
    out.set("lumpiness", Some(lumpiness));
    out.set("crossing_points_rate", Some(crossing_points_rate(y)));
    out.set("flat_spots_rate", Some(flat_spots_rate(y)));

    let lc = linearity_curvature(y);
    out.set("linearity", lc.map(|(l, _)| l));
    out.set("curvature", lc.map(|(_, c)| c));
    out.set("nonlinearity_proxy", nonlinearity_proxy(y));
    out.set("hurst_proxy", hurst_proxy(y));

    let sd = variance(y).sqrt();
    let cv = if sd <= 0.0 {
        Some(0.0)
    } else {
        let m = mean(y);
        (m != 0.0).then(|| sd / m.abs())
    };
    out.set("cv", cv);
    Ok(out)
}

/// Counts exogenous columns by type and derives the two ratio features.
pub fn extract_general_features(series: &TimeSeries) -> MetaFeatureVector {
    let mut nr_cat = 0usize;
    let mut nr_bin = 0usize;
    let mut nr_num = 0usize;
    for col in &series.exogenous {
        match col.values {
            ExoValues::Numeric(_) => nr_num += 1,
            ExoValues::Categorical { .. } => nr_cat += 1,
            ExoValues::Boolean(_) => nr_bin += 1,
        }
    }
    let nr_attr = nr_cat + nr_bin + nr_num;
    let mut out = MetaFeatureVector::default();
    out.set("nr_cat", Some(nr_cat as f64));
    out.set("nr_bin", Some(nr_bin as f64));
    out.set("nr_num", Some(nr_num as f64));
    out.set("nr_attr", Some(nr_attr as f64));
    out.set("inst_to_attr", Some(series.len() as f64 / nr_attr.max(1) as f64));
    out.set("num_to_cat", Some(nr_num as f64 / nr_cat.max(1) as f64));
    out
}

/// Full feature vector of a series: series features joined with the general
/// attribute counts.
pub fn extract_all(series: &TimeSeries, seasonality: &SeasonalityInfo) -> Result<MetaFeatureVector> {
    Ok(extract_series_features(&series.target, seasonality)?
        .merge(extract_general_features(series)))
}
