//! Row types of the experiment results store.
//!
//! One record holds the outcome of one (dataset, algorithm) evaluation. The
//! store itself (CSV persistence, resumption) lives in the harness; these
//! types are shared so ranking and meta-learning can fold over records
//! without touching the disk format.

use serde::{Deserialize, Serialize};

/// Whether an algorithm id names a standalone forecaster or an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKind {
    Base,
    Ensemble,
}

/// Outcome status of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    /// Evaluated; `smape` is present and finite.
    Ok,
    /// The algorithm errored on this dataset; no metric value.
    Failed,
    /// Evaluated but excluded from ranking (degenerate metric denominator).
    Excluded,
}

/// One (dataset, algorithm) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset_id: String,
    /// Base model name or canonical ensemble+HP string.
    pub algorithm_id: String,
    pub kind: AlgoKind,
    /// Corpus source tag (m3|m4|m5|fred|other) for per-source breakdowns.
    pub source: String,
    pub status: RecordStatus,
    pub smape: Option<f64>,
    /// Filled by ranking, never persisted in the store.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank: Option<f64>,
    /// Wall-clock cost; persisted to a sidecar, outside the determinism contract.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_ms: Option<u64>,
}

impl ResultRecord {
    /// A successful evaluation.
    pub fn ok(
        dataset_id: impl Into<String>,
        algorithm_id: impl Into<String>,
        kind: AlgoKind,
        source: impl Into<String>,
        smape: f64,
    ) -> ResultRecord {
        ResultRecord {
            dataset_id: dataset_id.into(),
            algorithm_id: algorithm_id.into(),
            kind,
            source: source.into(),
            status: RecordStatus::Ok,
            smape: Some(smape),
            rank: None,
            runtime_ms: None,
        }
    }

    /// A failed or excluded evaluation.
    pub fn without_value(
        dataset_id: impl Into<String>,
        algorithm_id: impl Into<String>,
        kind: AlgoKind,
        source: impl Into<String>,
        status: RecordStatus,
    ) -> ResultRecord {
        ResultRecord {
            dataset_id: dataset_id.into(),
            algorithm_id: algorithm_id.into(),
            kind,
            source: source.into(),
            status,
            smape: None,
            rank: None,
            runtime_ms: None,
        }
    }
}
