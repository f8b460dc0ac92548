//! Classical seasonal decomposition shared by the deseasonalizing
//! forecasters: period-position indices from a centered-moving-average
//! detrend, plus adjust / restore helpers for both seasonal modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{ma_trend, SeasonalMode};

/// Seasonal indices for one period, normalized to mean 0 (additive) or
/// mean 1 (multiplicative). Index slot for time `t` is `t % m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalIndices {
    pub period: usize,
    pub mode: SeasonalMode,
    pub values: Vec<f64>,
}

impl SeasonalIndices {
    /// Removes the seasonal component from `y` (time origin 0).
    pub fn adjust(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(t, &v)| match self.mode {
                SeasonalMode::Additive => v - self.values[t % self.period],
                SeasonalMode::Multiplicative => v / self.values[t % self.period],
            })
            .collect()
    }

    /// Restores the seasonal component for positions `start..start+vals.len()`.
    pub fn restore(&self, vals: &[f64], start: usize) -> Vec<f64> {
        vals.iter()
            .enumerate()
            .map(|(i, &v)| match self.mode {
                SeasonalMode::Additive => v + self.values[(start + i) % self.period],
                SeasonalMode::Multiplicative => v * self.values[(start + i) % self.period],
            })
            .collect()
    }
}

/// Estimates per-position seasonal indices from the moving-average detrended
/// series. Falls back from multiplicative to additive when the data cannot
/// support ratios (nonpositive trend or indices).
pub fn seasonal_indices(y: &[f64], period: usize, mode: SeasonalMode) -> Result<SeasonalIndices> {
    if period < 2 {
        return Err(Error::InvalidArgument(format!(
            "seasonal decomposition needs period ≥ 2, got {period}"
        )));
    }
    if y.len() < 2 * period {
        return Err(Error::SeriesTooShort(format!(
            "seasonal decomposition needs ≥ {} points for period {period}, got {}",
            2 * period,
            y.len()
        )));
    }
    if mode == SeasonalMode::Multiplicative {
        if let Some(idx) = try_indices(y, period, SeasonalMode::Multiplicative) {
            return Ok(idx);
        }
    }
    try_indices(y, period, SeasonalMode::Additive).ok_or_else(|| {
        Error::FitFailed(format!("could not estimate seasonal indices for period {period}"))
    })
}

fn try_indices(y: &[f64], period: usize, mode: SeasonalMode) -> Option<SeasonalIndices> {
    let (trend, lo) = ma_trend(y, period)?;
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (i, &tr) in trend.iter().enumerate() {
        let t = lo + i;
        let d = match mode {
            SeasonalMode::Additive => y[t] - tr,
            SeasonalMode::Multiplicative => {
                if tr.abs() < 1e-12 {
                    return None;
                }
                y[t] / tr
            }
        };
        if !d.is_finite() {
            return None;
        }
        sums[t % period] += d;
        counts[t % period] += 1;
    }
    if counts.contains(&0) {
        return None;
    }
    let mut values: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let mean = values.iter().sum::<f64>() / period as f64;
    match mode {
        SeasonalMode::Additive => values.iter_mut().for_each(|v| *v -= mean),
        SeasonalMode::Multiplicative => {
            if mean <= 0.0 {
                return None;
            }
            values.iter_mut().for_each(|v| *v /= mean);
            if values.iter().any(|&v| v <= 0.0) {
                return None;
            }
        }
    }
    Some(SeasonalIndices { period, mode, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_indices_recover_pattern() {
        let pattern = [3.0, 0.0, -2.0, -1.0];
        let y: Vec<f64> = (0..48).map(|t| 20.0 + 0.1 * t as f64 + pattern[t % 4]).collect();
        let idx = seasonal_indices(&y, 4, SeasonalMode::Additive).unwrap();
        for (got, want) in idx.values.iter().zip(pattern) {
            assert!((got - want).abs() < 0.05, "indices {:?}", idx.values);
        }
        let adjusted = idx.adjust(&y);
        // Adjusted series should be close to the pure trend.
        for (t, v) in adjusted.iter().enumerate() {
            assert!((v - (20.0 + 0.1 * t as f64)).abs() < 0.1);
        }
    }

    #[test]
    fn multiplicative_indices_mean_one() {
        let pattern = [1.3, 1.0, 0.7, 1.0];
        let y: Vec<f64> = (0..48).map(|t| (50.0 + t as f64) * pattern[t % 4]).collect();
        let idx = seasonal_indices(&y, 4, SeasonalMode::Multiplicative).unwrap();
        assert_eq!(idx.mode, SeasonalMode::Multiplicative);
        let mean: f64 = idx.values.iter().sum::<f64>() / 4.0;
        assert!((mean - 1.0).abs() < 1e-9);
        for (got, want) in idx.values.iter().zip(pattern) {
            assert!((got - want).abs() < 0.02, "indices {:?}", idx.values);
        }
    }

    #[test]
    fn restore_round_trips_adjust() {
        let pattern = [3.0, 0.0, -2.0, -1.0];
        let y: Vec<f64> = (0..24).map(|t| 10.0 + pattern[t % 4]).collect();
        let idx = seasonal_indices(&y, 4, SeasonalMode::Additive).unwrap();
        let adjusted = idx.adjust(&y);
        let back = idx.restore(&adjusted, 0);
        for (a, b) in back.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn multiplicative_falls_back_to_additive_on_nonpositive() {
        let pattern = [3.0, 0.0, -2.0, -1.0];
        let y: Vec<f64> = (0..24).map(|t| pattern[t % 4] - 1.0).collect();
        let idx = seasonal_indices(&y, 4, SeasonalMode::Multiplicative).unwrap();
        assert_eq!(idx.mode, SeasonalMode::Additive);
    }

    #[test]
    fn too_short_rejected() {
        let y = vec![1.0; 7];
        assert!(matches!(
            seasonal_indices(&y, 4, SeasonalMode::Additive),
            Err(Error::SeriesTooShort(_))
        ));
    }
}
