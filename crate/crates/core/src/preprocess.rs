//! Preprocessing: periodogram seasonality detection, Fourier terms for long
//! seasonal periods, and calendar-feature extraction from timestamps.

use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate, Timelike};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ExoColumn, ExoValues, TimeSeries};

/// How a detected seasonal component combines with the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeasonalMode {
    Additive,
    Multiplicative,
}

/// One detected seasonal component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedSeason {
    pub period: usize,
    pub mode: SeasonalMode,
}

/// Outcome of seasonality detection; both components optional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeasonalityInfo {
    pub primary: Option<DetectedSeason>,
    pub secondary: Option<DetectedSeason>,
}

impl SeasonalityInfo {
    pub fn primary_period(&self) -> Option<usize> {
        self.primary.map(|s| s.period)
    }

    pub fn secondary_period(&self) -> Option<usize> {
        self.secondary.map(|s| s.period)
    }
}

/// A peak must exceed this multiple of the median spectral density.
const PEAK_MEDIAN_RATIO: f64 = 10.0;
/// A period must fit this many full cycles into the series.
const MIN_CYCLES: usize = 3;

/// Spectral density at frequency bins 1..=T/2 (bin 0 / the mean is dropped).
pub(crate) fn periodogram(y: &[f64]) -> Vec<f64> {
    let t = y.len();
    let mean = y.iter().sum::<f64>() / t as f64;
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(t).process(&mut buf);
    (1..=t / 2).map(|j| buf[j].norm_sqr() / t as f64).collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Seasonal fit by period-wise means; returns the fitted values.
fn seasonal_means_fit(y: &[f64], m: usize) -> Vec<f64> {
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (t, &v) in y.iter().enumerate() {
        sums[t % m] += v;
        counts[t % m] += 1;
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(&s, &c)| s / c.max(1) as f64).collect();
    (0..y.len()).map(|t| means[t % m]).collect()
}

fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Residual variance after removing period-wise means at period `m`.
fn residual_variance(y: &[f64], m: usize) -> f64 {
    let fit = seasonal_means_fit(y, m);
    y.iter().zip(&fit).map(|(&v, &f)| (v - f) * (v - f)).sum::<f64>() / y.len() as f64
}

/// Shift making a series strictly positive for the log-scale fit.
fn positive_shift(y: &[f64]) -> f64 {
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        0.0
    } else {
        1.0 - min
    }
}

/// Detects one seasonal period on `y`, excluding `exclude` if given.
fn detect_one(y: &[f64], exclude: Option<usize>) -> Option<usize> {
    let t = y.len();
    let dens = periodogram(y);
    if dens.is_empty() {
        return None;
    }
    let med = median(&dens);
    let max_period = t / MIN_CYCLES;
    if max_period < 2 {
        return None;
    }
    // candidate bins: period = t/j within [2, max_period] means j in [t/max_period, t/2]
    let j_lo = (t as f64 / max_period as f64).ceil() as usize;
    let mut best: Option<(usize, f64)> = None;
    for j in j_lo.max(1)..=t / 2 {
        let d = dens[j - 1];
        if d <= 0.0 || d < PEAK_MEDIAN_RATIO * med {
            continue;
        }
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((j, d));
        }
    }
    let (j, _) = best?;
    // sub-bin refinement: parabolic interpolation through the peak and its
    // neighbors recovers frequencies that fall between bins
    let mut f_star = j as f64;
    if j >= 2 && j < t / 2 {
        let (a, b, c) = (dens[j - 2], dens[j - 1], dens[j]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-300 {
            let delta = 0.5 * (a - c) / denom;
            if delta.is_finite() && delta.abs() <= 0.5 {
                f_star += delta;
            }
        }
    }
    let m0 = (t as f64 / f_star).round() as usize;
    // integer refinement around the spectral estimate: pick the candidate
    // period whose period-wise means explain the most variance
    let total_var = variance(y);
    if total_var <= 0.0 {
        return None;
    }
    let lo = m0.saturating_sub(2).max(2);
    let hi = (m0 + 2).min(max_period);
    let mut best_m: Option<(usize, f64)> = None;
    for m in lo..=hi {
        if Some(m) == exclude {
            continue;
        }
        let rv = residual_variance(y, m);
        if best_m.is_none_or(|(_, brv)| rv < brv) {
            best_m = Some((m, rv));
        }
    }
    best_m.map(|(m, _)| m)
}

/// Residual after removing the least-squares line over the time index.
fn detrend_linear(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let tbar = (n - 1.0) / 2.0;
    let ybar = y.iter().sum::<f64>() / n;
    let sxx: f64 = (0..y.len()).map(|t| (t as f64 - tbar) * (t as f64 - tbar)).sum();
    let sxy: f64 = y.iter().enumerate().map(|(t, &v)| (t as f64 - tbar) * (v - ybar)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    y.iter()
        .enumerate()
        .map(|(t, &v)| v - (ybar + slope * (t as f64 - tbar)))
        .collect()
}

/// Fraction of variance left after the period-wise-mean fit (1 when the fit
/// explains nothing).
fn relative_residual(y: &[f64], m: usize) -> f64 {
    let v = variance(y);
    if v <= 0.0 {
        return 1.0;
    }
    residual_variance(y, m) / v
}

/// Centered moving-average trend of window `m` (even windows use the
/// standard 2×m weighting); returns the trend over the valid middle section
/// and the index of its first point.
pub(crate) fn ma_trend(y: &[f64], m: usize) -> Option<(Vec<f64>, usize)> {
    let t = y.len();
    let half = m / 2;
    if m < 2 || t < m + 2 {
        return None;
    }
    let mut trend = Vec::with_capacity(t - 2 * half);
    for i in half..t - half {
        let v = if m % 2 == 1 {
            y[i - half..=i + half].iter().sum::<f64>() / m as f64
        } else {
            (0.5 * y[i - half]
                + y[i - half + 1..i + half].iter().sum::<f64>()
                + 0.5 * y[i + half])
                / m as f64
        };
        trend.push(v);
    }
    Some((trend, half))
}

/// Relative residual of the seasonal fit after moving-average detrending;
/// falls back to linear detrending on series too short for the window.
fn seasonal_ratio(y: &[f64], m: usize) -> f64 {
    match ma_trend(y, m) {
        Some((trend, lo)) if trend.len() >= 2 * m => {
            let detrended: Vec<f64> =
                trend.iter().enumerate().map(|(i, &tr)| y[lo + i] - tr).collect();
            relative_residual(&detrended, m)
        }
        _ => relative_residual(&detrend_linear(y), m),
    }
}

/// The multiplicative fit must beat the additive one by this factor; a pure
/// additive seasonal survives a log transform, so near-ties stay additive.
const MULT_MARGIN: f64 = 0.95;

/// Chooses additive vs multiplicative seasonality by comparing how much
/// variance the period-wise means explain on the detrended raw scale against
/// the detrended log-shifted scale.
fn choose_mode(y: &[f64], m: usize) -> SeasonalMode {
    let ratio_add = seasonal_ratio(y, m);
    let shift = positive_shift(y);
    let logs: Vec<f64> = y.iter().map(|&v| (v + shift).ln()).collect();
    let ratio_mul = seasonal_ratio(&logs, m);
    if ratio_mul < MULT_MARGIN * ratio_add {
        SeasonalMode::Multiplicative
    } else {
        SeasonalMode::Additive
    }
}

/// Removes a seasonal component, returning the residual used for the second
/// detection pass.
pub fn remove_seasonality(y: &[f64], season: DetectedSeason) -> Vec<f64> {
    match season.mode {
        SeasonalMode::Additive => {
            let fit = seasonal_means_fit(y, season.period);
            y.iter().zip(&fit).map(|(&v, &f)| v - f).collect()
        }
        SeasonalMode::Multiplicative => {
            let shift = positive_shift(y);
            let logs: Vec<f64> = y.iter().map(|&v| (v + shift).ln()).collect();
            let fit = seasonal_means_fit(&logs, season.period);
            logs.iter().zip(&fit).map(|(&z, &f)| z - f).collect()
        }
    }
}

/// Detects up to two seasonal periods from the periodogram of the target.
///
/// A peak counts only when its density is at least ten times the median
/// density and the implied period completes at least three full cycles. The
/// first detected component is removed (per its additive or multiplicative
/// mode) and detection runs once more for a secondary period.
pub fn detect_seasonality(target: &[f64]) -> SeasonalityInfo {
    if target.len() < 8 || target.iter().any(|v| !v.is_finite()) {
        return SeasonalityInfo::default();
    }
    let Some(period) = detect_one(target, None) else {
        return SeasonalityInfo::default();
    };
    let mode = choose_mode(target, period);
    let primary = DetectedSeason { period, mode };
    let residual = remove_seasonality(target, primary);
    let secondary = detect_one(&residual, Some(period)).map(|p| DetectedSeason {
        period: p,
        mode: choose_mode(target, p),
    });
    SeasonalityInfo { primary: Some(primary), secondary }
}

/// Generated Fourier columns for one seasonal period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTerms {
    pub period: usize,
    pub num_pairs: usize,
    /// Length of the generated in-sample columns.
    pub t_len: usize,
}

/// Periods longer than this are represented by Fourier terms instead of
/// being handled as short seasonal cycles by downstream consumers.
pub const FOURIER_PERIOD_THRESHOLD: usize = 24;

/// Default pair count for long periods: K = min(4, ⌊period/2⌋).
pub fn default_fourier_pairs(period: usize) -> usize {
    4.min(period / 2)
}

/// Builds Fourier term metadata; columns are generated on demand so they
/// extend to arbitrary future time indices.
pub fn make_fourier_terms(period: usize, t_len: usize, num_pairs: usize) -> Result<FourierTerms> {
    if period < 2 {
        return Err(Error::InvalidArgument(format!("fourier period must be ≥ 2, got {period}")));
    }
    if num_pairs == 0 || num_pairs > period / 2 {
        return Err(Error::InvalidPairCount { k: num_pairs, period });
    }
    Ok(FourierTerms { period, num_pairs, t_len })
}

impl FourierTerms {
    /// Column values for time indices `start..start + len`.
    pub fn columns_at(&self, start: usize, len: usize) -> Vec<ExoColumn> {
        let mut cols = Vec::with_capacity(2 * self.num_pairs);
        for k in 1..=self.num_pairs {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / self.period as f64;
            let sin: Vec<f64> = (start..start + len).map(|t| (omega * t as f64).sin()).collect();
            let cos: Vec<f64> = (start..start + len).map(|t| (omega * t as f64).cos()).collect();
            cols.push(ExoColumn {
                name: format!("fourier_sin_{}_{}", self.period, k),
                values: ExoValues::Numeric(sin),
            });
            cols.push(ExoColumn {
                name: format!("fourier_cos_{}_{}", self.period, k),
                values: ExoValues::Numeric(cos),
            });
        }
        cols
    }

    /// In-sample columns (time indices `0..t_len`).
    pub fn columns(&self) -> Vec<ExoColumn> {
        self.columns_at(0, self.t_len)
    }

    /// Columns for the `h` steps after the in-sample window.
    pub fn future_columns(&self, h: usize) -> Vec<ExoColumn> {
        self.columns_at(self.t_len, h)
    }
}

/// Calendar columns extracted from timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarFeatures {
    pub columns: Vec<ExoColumn>,
}

const SECS_PER_HOUR: i64 = 3600;
const SECS_PER_DAY: i64 = 86_400;
/// Widest spacing still considered "monthly or finer".
const SECS_PER_LONG_MONTH: i64 = 31 * SECS_PER_DAY;

/// Extracts calendar features from the series timestamps.
///
/// Only columns meaningful at the observed spacing are emitted: sub-hourly
/// data gets `minute_of_hour`, sub-daily data `hour_of_day`, daily-or-finer
/// data the day-level columns, and monthly-or-finer data `month_of_year`.
/// Holiday columns require a supplied holiday set. `day_of_week` codes run
/// Monday = 0 through Sunday = 6.
pub fn extract_calendar(
    series: &TimeSeries,
    holidays: Option<&BTreeSet<NaiveDate>>,
) -> Result<CalendarFeatures> {
    let ts = series.timestamps.as_ref().ok_or(Error::NoTimestamps)?;
    let spacing = series.spacing_seconds().unwrap_or(SECS_PER_DAY);
    let mut columns = Vec::new();
    let numeric = |f: &dyn Fn(&chrono::NaiveDateTime) -> f64| -> Vec<f64> { ts.iter().map(f).collect() };
    if spacing < SECS_PER_HOUR {
        columns.push(ExoColumn {
            name: "minute_of_hour".into(),
            values: ExoValues::Numeric(numeric(&|t| f64::from(t.minute()))),
        });
    }
    if spacing < SECS_PER_DAY {
        columns.push(ExoColumn {
            name: "hour_of_day".into(),
            values: ExoValues::Numeric(numeric(&|t| f64::from(t.hour()))),
        });
    }
    if spacing <= SECS_PER_DAY {
        columns.push(ExoColumn {
            name: "day_of_week".into(),
            values: ExoValues::Numeric(numeric(&|t| f64::from(t.weekday().num_days_from_monday()))),
        });
        columns.push(ExoColumn {
            name: "day_of_month".into(),
            values: ExoValues::Numeric(numeric(&|t| f64::from(t.day()))),
        });
        let weekend: Vec<bool> =
            ts.iter().map(|t| t.weekday().num_days_from_monday() >= 5).collect();
        if let Some(hol) = holidays {
            let is_holiday: Vec<bool> = ts.iter().map(|t| hol.contains(&t.date())).collect();
            let is_workday: Vec<bool> = weekend
                .iter()
                .zip(&is_holiday)
                .map(|(&we, &ho)| !we && !ho)
                .collect();
            columns.push(ExoColumn { name: "is_weekend".into(), values: ExoValues::Boolean(weekend) });
            columns
                .push(ExoColumn { name: "is_holiday".into(), values: ExoValues::Boolean(is_holiday) });
            columns
                .push(ExoColumn { name: "is_workday".into(), values: ExoValues::Boolean(is_workday) });
        } else {
            columns.push(ExoColumn { name: "is_weekend".into(), values: ExoValues::Boolean(weekend) });
        }
    }
    if spacing <= SECS_PER_LONG_MONTH {
        columns.push(ExoColumn {
            name: "month_of_year".into(),
            values: ExoValues::Numeric(numeric(&|t| f64::from(t.month()))),
        });
    }
    Ok(CalendarFeatures { columns })
}

/// Parses a holiday calendar: ISO-8601 dates, one per line; blank lines and
/// `#` comments ignored.
pub fn parse_holidays(text: &str) -> Result<BTreeSet<NaiveDate>> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| {
            Error::InvalidArgument(format!("holiday file line {}: `{line}`: {e}", i + 1))
        })?;
        out.insert(date);
    }
    Ok(out)
}
