//! Core time-series types and dataset splitting.
//!
//! The canonical time axis is the integer position `0..T`; timestamps, when
//! present, are metadata consumed by preprocessing (calendar features,
//! spacing checks). All types are immutable once constructed.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values of one exogenous column, aligned 1:1 with the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExoValues {
    Numeric(Vec<f64>),
    /// Integer codes into `levels`; codes are assigned in sorted level order.
    Categorical { codes: Vec<u32>, levels: Vec<String> },
    Boolean(Vec<bool>),
}

impl ExoValues {
    pub fn len(&self) -> usize {
        match self {
            ExoValues::Numeric(v) => v.len(),
            ExoValues::Categorical { codes, .. } => codes.len(),
            ExoValues::Boolean(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Numeric view of the column (codes and booleans as 0/1 integer codes).
    pub fn as_numeric(&self) -> Vec<f64> {
        match self {
            ExoValues::Numeric(v) => v.clone(),
            ExoValues::Categorical { codes, .. } => codes.iter().map(|&c| f64::from(c)).collect(),
            ExoValues::Boolean(v) => v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    fn slice(&self, r: std::ops::Range<usize>) -> ExoValues {
        match self {
            ExoValues::Numeric(v) => ExoValues::Numeric(v[r].to_vec()),
            ExoValues::Categorical { codes, levels } => ExoValues::Categorical {
                codes: codes[r].to_vec(),
                levels: levels.clone(),
            },
            ExoValues::Boolean(v) => ExoValues::Boolean(v[r].to_vec()),
        }
    }
}

/// A named exogenous column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExoColumn {
    pub name: String,
    pub values: ExoValues,
}

/// A univariate series with optional timestamps and exogenous columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub timestamps: Option<Vec<NaiveDateTime>>,
    pub target: Vec<f64>,
    pub exogenous: Vec<ExoColumn>,
    pub frequency_hint: Option<usize>,
}

/// Maximum allowed deviation of timestamp spacing, in seconds.
const SPACING_TOLERANCE_SECS: i64 = 1;

impl TimeSeries {
    /// Builds a validated series. Rejects empty or non-finite targets,
    /// misaligned columns, and irregular timestamps.
    pub fn new(
        id: impl Into<String>,
        timestamps: Option<Vec<NaiveDateTime>>,
        target: Vec<f64>,
        exogenous: Vec<ExoColumn>,
        frequency_hint: Option<usize>,
    ) -> Result<TimeSeries> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidSeries { id: id.clone(), reason };
        if target.is_empty() {
            return Err(invalid("target is empty".into()));
        }
        if let Some(pos) = target.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite or missing target at row {pos}")));
        }
        if let Some(ts) = &timestamps {
            if ts.len() != target.len() {
                return Err(invalid(format!(
                    "timestamp count {} != target length {}",
                    ts.len(),
                    target.len()
                )));
            }
            if ts.len() >= 2 {
                let spacing = (ts[1] - ts[0]).num_seconds();
                if spacing <= 0 {
                    return Err(invalid("timestamps not strictly increasing".into()));
                }
                for (i, w) in ts.windows(2).enumerate() {
                    let d = (w[1] - w[0]).num_seconds();
                    if d <= 0 {
                        return Err(invalid(format!("timestamps not strictly increasing at row {}", i + 1)));
                    }
                    if (d - spacing).abs() > SPACING_TOLERANCE_SECS {
                        return Err(invalid(format!(
                            "irregular spacing at row {}: {}s vs {}s",
                            i + 1,
                            d,
                            spacing
                        )));
                    }
                }
            }
        }
        for col in &exogenous {
            if col.values.len() != target.len() {
                return Err(invalid(format!(
                    "exogenous column `{}` length {} != target length {}",
                    col.name,
                    col.values.len(),
                    target.len()
                )));
            }
            if let ExoValues::Numeric(v) = &col.values {
                if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                    return Err(invalid(format!(
                        "non-finite value in exogenous column `{}` at row {pos}",
                        col.name
                    )));
                }
            }
        }
        if frequency_hint == Some(0) {
            return Err(invalid("frequency_hint must be positive".into()));
        }
        Ok(TimeSeries { id, timestamps, target, exogenous, frequency_hint })
    }

    /// A plain series without timestamps or exogenous columns.
    pub fn from_values(id: impl Into<String>, target: Vec<f64>) -> Result<TimeSeries> {
        TimeSeries::new(id, None, target, Vec::new(), None)
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Timestamp spacing in seconds, when timestamps are present.
    pub fn spacing_seconds(&self) -> Option<i64> {
        let ts = self.timestamps.as_ref()?;
        if ts.len() >= 2 {
            Some((ts[1] - ts[0]).num_seconds())
        } else {
            None
        }
    }

    /// Timestamps extrapolated `h` steps beyond the end at the observed spacing.
    pub fn extend_timestamps(&self, h: usize) -> Option<Vec<NaiveDateTime>> {
        let ts = self.timestamps.as_ref()?;
        let spacing = chrono::Duration::seconds(self.spacing_seconds()?);
        let last = *ts.last()?;
        Some((1..=h).map(|k| last + spacing * k as i32).collect())
    }

    fn slice(&self, r: std::ops::Range<usize>) -> TimeSeries {
        TimeSeries {
            id: self.id.clone(),
            timestamps: self.timestamps.as_ref().map(|ts| ts[r.clone()].to_vec()),
            target: self.target[r.clone()].to_vec(),
            exogenous: self
                .exogenous
                .iter()
                .map(|c| ExoColumn { name: c.name.clone(), values: c.values.slice(r.clone()) })
                .collect(),
            frequency_hint: self.frequency_hint,
        }
    }
}

/// Per-model predictions over one shared forecast horizon; the input to
/// every ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastMatrix {
    pub model_ids: Vec<String>,
    /// `values[m]` = the h-step forecast of model `m`.
    pub values: Vec<Vec<f64>>,
    /// Time indices being forecast (relative to the series origin).
    pub horizon_index: Vec<usize>,
}

impl ForecastMatrix {
    pub fn new(model_ids: Vec<String>, values: Vec<Vec<f64>>, horizon_index: Vec<usize>) -> Result<ForecastMatrix> {
        if model_ids.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} model ids but {} forecast rows",
                model_ids.len(),
                values.len()
            )));
        }
        for (id, row) in model_ids.iter().zip(&values) {
            if row.len() != horizon_index.len() {
                return Err(Error::InvalidArgument(format!(
                    "forecast of `{id}` has {} steps, horizon has {}",
                    row.len(),
                    horizon_index.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite forecast from `{id}`")));
            }
        }
        Ok(ForecastMatrix { model_ids, values, horizon_index })
    }

    pub fn horizon(&self) -> usize {
        self.horizon_index.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn row(&self, model_id: &str) -> Option<&[f64]> {
        let i = self.model_ids.iter().position(|m| m == model_id)?;
        Some(&self.values[i])
    }

    /// Predictions of every model at one horizon step.
    pub fn step(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k]).collect()
    }

    /// A matrix restricted to the given models, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<ForecastMatrix> {
        let mut values = Vec::with_capacity(ids.len());
        for id in ids {
            let row = self
                .row(id)
                .ok_or_else(|| Error::UnknownName(id.clone(), "forecast matrix".into()))?;
            values.push(row.to_vec());
        }
        ForecastMatrix::new(ids.to_vec(), values, self.horizon_index.clone())
    }
}

/// How to carve the test window off the tail of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    /// Exact number of test points.
    Horizon(usize),
    /// Fraction of points kept for training; the remainder is the test tail.
    TrainFraction(f64),
}

impl SplitSpec {
    /// Resolves to a concrete horizon for a series of length `len`.
    pub fn horizon(&self, len: usize) -> Result<usize> {
        let h = match *self {
            SplitSpec::Horizon(h) => h,
            SplitSpec::TrainFraction(f) => {
                if !(0.0..1.0).contains(&f) || f <= 0.0 {
                    return Err(Error::InvalidArgument(format!("train_fraction {f} outside (0, 1)")));
                }
                len - ((f * len as f64).floor() as usize).min(len)
            }
        };
        if h == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if len < h + 2 {
            return Err(Error::SplitTooLarge { h, len });
        }
        Ok(h)
    }
}

/// Tail split: train is the prefix, test the last `h` points. No shuffling;
/// exogenous columns and timestamps split identically.
pub fn split(series: &TimeSeries, spec: SplitSpec) -> Result<(TimeSeries, TimeSeries)> {
    let h = spec.horizon(series.len())?;
    let cut = series.len() - h;
    Ok((series.slice(0..cut), series.slice(cut..series.len())))
}

/// Index ranges of the internal ensemble train/validation split, both
/// relative to the training series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleTrainSplit {
    pub etrain: std::ops::Range<usize>,
    pub evalid: std::ops::Range<usize>,
}

impl EnsembleTrainSplit {
    pub fn etrain_len(&self) -> usize {
        self.etrain.len()
    }

    pub fn evalid_len(&self) -> usize {
        self.evalid.len()
    }
}

/// Default fraction of the training data reserved for ensemble validation.
pub const DEFAULT_VALID_FRACTION: f64 = 0.25;

/// Splits training data into an ensemble train prefix and validation tail.
///
/// The seasonal cap, when a period is relevant, comes from the series'
/// frequency hint; callers with a detected period should prefer
/// [`ensemble_split_len`].
pub fn ensemble_split(train: &TimeSeries, valid_fraction: f64) -> Result<EnsembleTrainSplit> {
    ensemble_split_len(train.len(), valid_fraction, train.frequency_hint)
}

/// Length-level ensemble split.
///
/// The validation set holds the last `ceil(valid_fraction * len)` points.
/// When a seasonal period `m` is known the validation length is capped at
/// `max(2m, 10)` so short seasonal series keep enough cycles for fitting.
pub fn ensemble_split_len(
    train_len: usize,
    valid_fraction: f64,
    seasonality: Option<usize>,
) -> Result<EnsembleTrainSplit> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("valid_fraction {valid_fraction} outside (0, 1)")));
    }
    let mut v = (valid_fraction * train_len as f64).ceil() as usize;
    if let Some(m) = seasonality {
        v = v.min((2 * m).max(10));
    }
    v = v.max(1);
    if train_len < v + 2 {
        return Err(Error::SeriesTooShort(format!(
            "train length {train_len} leaves fewer than 2 ensemble-train points before a {v}-point validation tail"
        )));
    }
    Ok(EnsembleTrainSplit { etrain: 0..train_len - v, evalid: train_len - v..train_len })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn ts(vals: &[f64]) -> TimeSeries {
        TimeSeries::from_values("t", vals.to_vec()).unwrap()
    }

    #[test]
    fn split_is_positional() {
        let (train, test) = split(&ts(&[1.0, 2.0, 3.0, 4.0, 5.0]), SplitSpec::Horizon(2)).unwrap();
        assert_eq!(train.target, vec![1.0, 2.0, 3.0]);
        assert_eq!(test.target, vec![4.0, 5.0]);
    }

    #[test]
    fn split_too_large() {
        let err = split(&ts(&[7.0]), SplitSpec::Horizon(1)).unwrap_err();
        assert!(matches!(err, Error::SplitTooLarge { .. }));
    }

    #[test]
    fn split_carries_exogenous() {
        let s = TimeSeries::new(
            "e",
            None,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![ExoColumn {
                name: "cat".into(),
                values: ExoValues::Categorical {
                    codes: vec![0, 1, 2, 3],
                    levels: vec!["a".into(), "b".into(), "c".into(), "d".into()],
                },
            }],
            None,
        )
        .unwrap();
        let (train, test) = split(&s, SplitSpec::Horizon(1)).unwrap();
        match &train.exogenous[0].values {
            ExoValues::Categorical { codes, .. } => assert_eq!(codes, &vec![0, 1, 2]),
            _ => panic!("wrong column type"),
        }
        match &test.exogenous[0].values {
            ExoValues::Categorical { codes, .. } => assert_eq!(codes, &vec![3]),
            _ => panic!("wrong column type"),
        }
    }

    #[test]
    fn split_concatenation_reproduces_input() {
        let s = ts(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0]);
        let (train, test) = split(&s, SplitSpec::Horizon(3)).unwrap();
        let mut joined = train.target.clone();
        joined.extend_from_slice(&test.target);
        assert_eq!(joined, s.target);
    }

    #[test]
    fn ensemble_split_ceiling() {
        let sp = ensemble_split_len(100, 0.2, None).unwrap();
        assert_eq!(sp.evalid_len(), 20);
        assert_eq!(sp.etrain_len(), 80);
        let sp = ensemble_split_len(5, 0.2, None).unwrap();
        assert_eq!(sp.evalid_len(), 1);
    }

    #[test]
    fn ensemble_split_seasonal_cap() {
        let sp = ensemble_split_len(100, 0.5, Some(6)).unwrap();
        assert_eq!(sp.evalid_len(), 12); // capped at 2m
        let sp = ensemble_split_len(100, 0.5, Some(3)).unwrap();
        assert_eq!(sp.evalid_len(), 10); // floor of the cap
    }

    #[test]
    fn ensemble_split_too_short() {
        assert!(matches!(ensemble_split_len(3, 0.5, None).unwrap_err(), Error::SeriesTooShort(_)));
    }

    #[test]
    fn rejects_missing_target() {
        assert!(TimeSeries::from_values("m", vec![1.0, f64::NAN, 3.0]).is_err());
    }

    #[test]
    fn rejects_irregular_timestamps() {
        let base = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let stamps = vec![
            base,
            base + chrono::Duration::days(1),
            base + chrono::Duration::days(5),
        ];
        assert!(TimeSeries::new("irr", Some(stamps), vec![1.0, 2.0, 3.0], vec![], None).is_err());
    }

    #[test]
    fn extends_timestamps_at_spacing() {
        let base = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let stamps: Vec<_> = (0..3).map(|i| base + chrono::Duration::days(i)).collect();
        let s = TimeSeries::new("x", Some(stamps), vec![1.0, 2.0, 3.0], vec![], None).unwrap();
        let ext = s.extend_timestamps(2).unwrap();
        assert_eq!(ext[0], base + chrono::Duration::days(3));
        assert_eq!(ext[1], base + chrono::Duration::days(4));
    }
}
