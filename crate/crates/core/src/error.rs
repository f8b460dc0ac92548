//! Error types shared across the toolkit.

use thiserror::Error;

/// Errors raised by data handling, model fitting and ensemble evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series `{id}`: {reason}")]
    InvalidSeries { id: String, reason: String },

    #[error("split too large: horizon {h} leaves fewer than 2 training points (series length {len})")]
    SplitTooLarge { h: usize, len: usize },

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("seasonal period {m} too long for series of length {len}")]
    PeriodTooLong { m: usize, len: usize },

    #[error("no seasonality available: {0}")]
    NoSeasonality(String),

    #[error("invalid Fourier pair count {k} for period {period}")]
    InvalidPairCount { k: usize, period: usize },

    #[error("series has no timestamps")]
    NoTimestamps,

    #[error("empty model pool")]
    EmptyPool,

    #[error("unknown name `{0}` in {1}")]
    UnknownName(String, String),

    #[error("degenerate design matrix: {0}")]
    DegenerateDesign(String),

    #[error("sMAPE denominator is zero (sum of actuals and predictions cancels)")]
    ZeroDenominator,

    #[error("unsupported alpha {0}; supported: 0.05, 0.10")]
    UnsupportedAlpha(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model pool mismatch: {0}")]
    PoolMismatch(String),

    #[error("ensemble+HP grid incomplete: {0}")]
    IncompleteGrid(String),

    #[error("meta-feature set version mismatch: selector trained on `{expected}`, got `{actual}`")]
    FeatureVersionMismatch { expected: String, actual: String },

    #[error("too few rows for meta-training: {got} (need at least {need})")]
    TooFewRows { got: usize, need: usize },

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
