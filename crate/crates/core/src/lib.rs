//! Time-series forecast combination toolkit.
//!
//! The crate covers the full pipeline used by the `tscombine` harness:
//! dataset types and splits, preprocessing (seasonality detection, calendar
//! features), a pool of classical base forecasters, internal supervised
//! learners, ensemble combination methods, evaluation metrics with
//! critical-difference statistics, per-series meta-features, and the
//! meta-learner that picks promising ensembles per dataset.

pub mod base_models;
pub mod ensembles;
pub mod error;
pub mod learners;
pub mod meta_features;
pub mod meta_learner;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod series;
pub mod store;

pub use base_models::{BaseForecaster, FitReport, ModelName};
pub use ensembles::{EnsembleMethod, EnsembleSpec, SelectionStrategy, WeightVector};
pub use error::{Error, Result};
pub use rng::RngSeed;
pub use series::{
    ensemble_split, ensemble_split_len, split, EnsembleTrainSplit, ExoColumn, ExoValues,
    ForecastMatrix, SplitSpec, TimeSeries, DEFAULT_VALID_FRACTION,
};
pub use store::{AlgoKind, RecordStatus, ResultRecord};
