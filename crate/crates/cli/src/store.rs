//! The append-only results store.
//!
//! `results.csv` holds one row per (dataset, algorithm) evaluation behind a
//! versioned `#tsresults-v1` comment line; it is the resumption point and
//! the input to every report. Wall-clock timings go to a `timings.csv`
//! sidecar so the store itself stays byte-reproducible across machines.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tscombine_core::{AlgoKind, RecordStatus, ResultRecord};

use crate::error::{HarnessError, Result, SchemaError};

pub const STORE_VERSION: &str = "tsresults-v1";
pub const STORE_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

/// One `timings.csv` row: dataset id, algorithm id, elapsed milliseconds.
pub type TimingRow = (String, String, u64);

/// The persisted columns; `rank` is derived and `runtime_ms` lives in the
/// sidecar, so neither appears here.
#[derive(Debug, Serialize, Deserialize)]
struct StoreRow {
    dataset_id: String,
    algorithm_id: String,
    kind: AlgoKind,
    source: String,
    status: RecordStatus,
    smape: Option<f64>,
}

impl From<&ResultRecord> for StoreRow {
    fn from(r: &ResultRecord) -> StoreRow {
        StoreRow {
            dataset_id: r.dataset_id.clone(),
            algorithm_id: r.algorithm_id.clone(),
            kind: r.kind,
            source: r.source.clone(),
            status: r.status,
            smape: r.smape,
        }
    }
}

impl From<StoreRow> for ResultRecord {
    fn from(row: StoreRow) -> ResultRecord {
        ResultRecord {
            dataset_id: row.dataset_id,
            algorithm_id: row.algorithm_id,
            kind: row.kind,
            source: row.source,
            status: row.status,
            smape: row.smape,
            rank: None,
            runtime_ms: None,
        }
    }
}

fn append_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| HarnessError::io(path, e))?;
    file.write_all(bytes).map_err(|e| HarnessError::io(path, e))
}

fn is_empty_or_absent(path: &Path) -> Result<bool> {
    match std::fs::metadata(path) {
        Ok(meta) => Ok(meta.len() == 0),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(true),
        Err(e) => Err(HarnessError::io(path, e)),
    }
}

/// Appends records, writing the version line and header on first use.
pub fn append_records(path: &Path, records: &[ResultRecord]) -> Result<()> {
    if records.is_empty() {
        return Ok(());
    }
    let fresh = is_empty_or_absent(path)?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(Vec::new());
    for record in records {
        writer.serialize(StoreRow::from(record)).map_err(|e| HarnessError::csv(path, e))?;
    }
    let body = writer.into_inner().expect("vec writer never fails");
    let mut bytes = Vec::with_capacity(body.len() + STORE_VERSION.len() + 2);
    if fresh {
        bytes.extend_from_slice(format!("#{STORE_VERSION}\n").as_bytes());
    }
    bytes.extend_from_slice(&body);
    append_bytes(path, &bytes)
}

/// Loads the whole store, checking the version line.
pub fn load_records(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    if first != format!("#{STORE_VERSION}") {
        return Err(HarnessError::StoreVersion {
            path: path.display().to_string(),
            found: first.to_string(),
            expected: STORE_VERSION,
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<StoreRow>().enumerate() {
        let row = row.map_err(|e| HarnessError::csv(path, e))?;
        if row.status == RecordStatus::Ok && row.smape.is_none() {
            return Err(SchemaError::new(path, "ok record without an smape value")
                .at(i as u64 + 1, "smape")
                .into());
        }
        records.push(row.into());
    }
    Ok(records)
}

/// Returns the store contents when the file exists, else an empty list.
pub fn load_if_present(path: &Path) -> Result<Vec<ResultRecord>> {
    if path.exists() {
        load_records(path)
    } else {
        Ok(Vec::new())
    }
}

/// The (dataset, algorithm) pairs already evaluated.
pub fn existing_keys(records: &[ResultRecord]) -> BTreeSet<(String, String)> {
    records.iter().map(|r| (r.dataset_id.clone(), r.algorithm_id.clone())).collect()
}

/// Appends wall-clock timings to the sidecar (header on first use).
pub fn append_timings(path: &Path, rows: &[TimingRow]) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let fresh = is_empty_or_absent(path)?;
    let mut bytes = Vec::new();
    if fresh {
        bytes.extend_from_slice(b"dataset_id,algorithm_id,runtime_ms\n");
    }
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(bytes);
    for row in rows {
        writer.serialize(row).map_err(|e| HarnessError::csv(path, e))?;
    }
    append_bytes(path, &writer.into_inner().expect("vec writer never fails"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<ResultRecord> {
        vec![
            ResultRecord::ok("d1", "naive", AlgoKind::Base, "m3", 12.5),
            ResultRecord::without_value(
                "d1",
                "stacking(folds=5;meta=rf)@all",
                AlgoKind::Ensemble,
                "m3",
                RecordStatus::Failed,
            ),
            ResultRecord::without_value("d2", "naive", AlgoKind::Base, "m4", RecordStatus::Excluded),
        ]
    }

    #[test]
    fn append_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STORE_FILE);
        let records = sample_records();
        append_records(&path, &records[..2]).unwrap();
        append_records(&path, &records[2..]).unwrap();
        let loaded = load_records(&path).unwrap();
        assert_eq!(loaded, records);
    }

    #[test]
    fn store_starts_with_version_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STORE_FILE);
        append_records(&path, &sample_records()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("#tsresults-v1"));
        assert_eq!(lines.next(), Some("dataset_id,algorithm_id,kind,source,status,smape"));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STORE_FILE);
        std::fs::write(&path, "#tsresults-v9\ndataset_id\n").unwrap();
        let err = load_records(&path).unwrap_err();
        assert!(matches!(err, HarnessError::StoreVersion { .. }), "{err}");

        std::fs::write(&path, "dataset_id,algorithm_id\n").unwrap();
        assert!(load_records(&path).is_err());
    }

    #[test]
    fn ok_record_without_value_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STORE_FILE);
        std::fs::write(
            &path,
            "#tsresults-v1\ndataset_id,algorithm_id,kind,source,status,smape\nd1,naive,base,m3,ok,\n",
        )
        .unwrap();
        let err = load_records(&path).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("smape"), "{err}");
    }

    #[test]
    fn existing_keys_come_back_sorted_unique() {
        let keys = existing_keys(&sample_records());
        assert_eq!(keys.len(), 3);
        assert!(keys.contains(&("d1".into(), "naive".into())));
    }

    #[test]
    fn timings_sidecar_has_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TIMINGS_FILE);
        append_timings(&path, &[("d1".into(), "naive".into(), 12)]).unwrap();
        append_timings(&path, &[("d2".into(), "naive".into(), 7)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "dataset_id,algorithm_id,runtime_ms\nd1,naive,12\nd2,naive,7\n");
    }

    #[test]
    fn load_if_present_tolerates_absence() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_if_present(&dir.path().join("nope.csv")).unwrap().is_empty());
    }
}
