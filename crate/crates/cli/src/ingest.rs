//! Corpus ingestion.
//!
//! One CSV file per series: an optional ISO-8601 `timestamp` column, a
//! mandatory `target` column, and any further columns as exogenous
//! variables (types inferred per column: boolean, numeric, else
//! categorical). A manifest CSV — recognized by its `path` column — lists
//! series files with source tags for the per-source report breakdown;
//! directories are read as one series per contained `.csv` file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use tscombine_core::series::{ExoColumn, ExoValues, TimeSeries};

use crate::error::{HarnessError, Result, SchemaError};

/// Recognized corpus source tags.
pub const SOURCES: [&str; 5] = ["m3", "m4", "m5", "fred", "other"];

/// A validated series plus the corpus it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedSeries {
    pub series: TimeSeries,
    pub source: String,
}

/// Reads every corpus path (series file, manifest, or directory) into a
/// deduplicated list sorted by series id.
pub fn ingest(paths: &[PathBuf]) -> Result<Vec<IngestedSeries>> {
    let mut all = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| HarnessError::io(path, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
                .collect();
            files.sort();
            for file in files {
                all.push(read_series(&file, "other", None, None)?);
            }
        } else if is_manifest(path)? {
            all.extend(read_manifest(path)?);
        } else {
            all.push(read_series(path, "other", None, None)?);
        }
    }
    all.sort_by(|a, b| a.series.id.cmp(&b.series.id));
    let mut seen = BTreeSet::new();
    for entry in &all {
        if !seen.insert(entry.series.id.clone()) {
            return Err(SchemaError::new(
                Path::new("corpus"),
                format!("duplicate series id `{}`", entry.series.id),
            )
            .into());
        }
    }
    Ok(all)
}

/// A manifest is any CSV whose header has a `path` column; `path` is
/// therefore a reserved column name for series files.
fn is_manifest(path: &Path) -> Result<bool> {
    let mut reader = open(path)?;
    let headers = reader.headers().map_err(|e| HarnessError::csv(path, e))?;
    Ok(headers.iter().any(|h| h == "path"))
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))
}

fn read_manifest(path: &Path) -> Result<Vec<IngestedSeries>> {
    let mut reader = open(path)?;
    let headers = reader.headers().map_err(|e| HarnessError::csv(path, e))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let path_col = column("path").expect("checked by is_manifest");
    let id_col = column("id");
    let source_col = column("source");
    let period_col = column("period");
    let base = path.parent().unwrap_or(Path::new("."));

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 1;
        let record = record.map_err(|e| HarnessError::csv(path, e))?;
        let cell = |col: Option<usize>| col.and_then(|c| record.get(c)).map(str::trim);
        let file = cell(Some(path_col)).unwrap_or("");
        if file.is_empty() {
            return Err(SchemaError::new(path, "empty series path").at(row, "path").into());
        }
        let source = match cell(source_col) {
            None | Some("") => "other",
            Some(tag) if SOURCES.contains(&tag) => tag,
            Some(tag) => {
                return Err(SchemaError::new(
                    path,
                    format!("unknown source tag `{tag}` (expected one of {SOURCES:?})"),
                )
                .at(row, "source")
                .into());
            }
        };
        let id = cell(id_col).filter(|s| !s.is_empty());
        let period = match cell(period_col) {
            None | Some("") => None,
            Some(text) => Some(text.parse::<usize>().map_err(|_| {
                SchemaError::new(path, format!("invalid period `{text}`")).at(row, "period")
            })?),
        };
        out.push(read_series(&base.join(file), source, id, period)?);
    }
    Ok(out)
}

const TIMESTAMP_FORMATS: [&str; 3] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d"];

fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    for format in TIMESTAMP_FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(text, format) {
            return Some(t);
        }
        if let Ok(d) = chrono::NaiveDate::parse_from_str(text, format) {
            return Some(d.and_hms_opt(0, 0, 0).unwrap());
        }
    }
    None
}

/// Reads one series file; the id defaults to the file stem.
fn read_series(
    path: &Path,
    source: &str,
    id: Option<&str>,
    period: Option<usize>,
) -> Result<IngestedSeries> {
    let mut reader = open(path)?;
    let headers = reader.headers().map_err(|e| HarnessError::csv(path, e))?.clone();
    let target_col = headers.iter().position(|h| h == "target").ok_or_else(|| {
        SchemaError::new(path, format!("no `target` column (header: {})", headers.iter().collect::<Vec<_>>().join(",")))
    })?;
    let timestamp_col = headers.iter().position(|h| h == "timestamp");
    let exo_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != target_col && Some(*c) != timestamp_col)
        .map(|(c, name)| (c, name.to_string()))
        .collect();

    let mut target = Vec::new();
    let mut timestamps = timestamp_col.map(|_| Vec::new());
    let mut exo_raw: Vec<Vec<String>> = vec![Vec::new(); exo_cols.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 1;
        let record = record.map_err(|e| HarnessError::csv(path, e))?;
        let cell = |col: usize, name: &str| -> std::result::Result<String, SchemaError> {
            let text = record.get(col).map(str::trim).unwrap_or("");
            if text.is_empty() {
                Err(SchemaError::new(path, "missing cell").at(row, name))
            } else {
                Ok(text.to_string())
            }
        };
        let raw = cell(target_col, "target")?;
        target.push(raw.parse::<f64>().map_err(|_| {
            SchemaError::new(path, format!("invalid target `{raw}`")).at(row, "target")
        })?);
        if let (Some(col), Some(ts)) = (timestamp_col, timestamps.as_mut()) {
            let raw = cell(col, "timestamp")?;
            ts.push(parse_timestamp(&raw).ok_or_else(|| {
                SchemaError::new(path, format!("invalid ISO-8601 timestamp `{raw}`"))
                    .at(row, "timestamp")
            })?);
        }
        for ((col, name), values) in exo_cols.iter().zip(&mut exo_raw) {
            values.push(cell(*col, name)?);
        }
    }

    let exogenous = exo_cols
        .iter()
        .zip(exo_raw)
        .map(|((_, name), raw)| ExoColumn { name: name.clone(), values: infer_column(&raw) })
        .collect();
    let id = match id {
        Some(id) => id.to_string(),
        None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    let series = TimeSeries::new(id, timestamps, target, exogenous, period)
        .map_err(|e| match e {
            tscombine_core::Error::InvalidSeries { reason, .. } => {
                HarnessError::from(SchemaError::new(path, reason))
            }
            other => HarnessError::from(other),
        })?;
    Ok(IngestedSeries { series, source: source.to_string() })
}

/// Column type inference: all-boolean, else all-numeric, else categorical
/// with levels coded in sorted order.
fn infer_column(raw: &[String]) -> ExoValues {
    let as_bool = |s: &str| -> Option<bool> {
        if s.eq_ignore_ascii_case("true") {
            Some(true)
        } else if s.eq_ignore_ascii_case("false") {
            Some(false)
        } else {
            None
        }
    };
    if let Some(bools) = raw.iter().map(|s| as_bool(s)).collect::<Option<Vec<bool>>>() {
        return ExoValues::Boolean(bools);
    }
    if let Some(nums) = raw.iter().map(|s| s.parse::<f64>().ok()).collect::<Option<Vec<f64>>>() {
        return ExoValues::Numeric(nums);
    }
    let levels: Vec<String> = raw.iter().cloned().collect::<BTreeSet<String>>().into_iter().collect();
    let codes = raw
        .iter()
        .map(|v| levels.binary_search(v).expect("level from the same column") as u32)
        .collect();
    ExoValues::Categorical { codes, levels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn plain_series_file_with_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let mut content = String::from("timestamp,target\n");
        for day in 1..=10 {
            content.push_str(&format!("2024-01-{day:02},{}\n", day as f64 * 1.5));
        }
        let path = write_file(dir.path(), "sales.csv", &content);
        let corpus = ingest(&[path]).unwrap();
        assert_eq!(corpus.len(), 1);
        let entry = &corpus[0];
        assert_eq!(entry.series.id, "sales");
        assert_eq!(entry.series.len(), 10);
        assert_eq!(entry.source, "other");
        assert_eq!(entry.series.spacing_seconds(), Some(86_400));
    }

    #[test]
    fn missing_target_cell_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "bad.csv", "target,price\n1,4\n2,5\n,6\n4,7\n");
        let err = ingest(&[path]).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        assert!(err.contains("target"), "{err}");
    }

    #[test]
    fn missing_target_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "bad.csv", "value\n1\n2\n");
        let err = ingest(&[path]).unwrap_err().to_string();
        assert!(err.contains("no `target` column"), "{err}");
    }

    #[test]
    fn extra_columns_become_typed_exogenous() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "shop.csv",
            "target,price,promo,region\n10,1.5,true,north\n11,1.6,false,south\n12,1.4,true,north\n",
        );
        let corpus = ingest(&[path]).unwrap();
        let exo = &corpus[0].series.exogenous;
        assert_eq!(exo.len(), 3);
        assert_eq!(exo[0].values, ExoValues::Numeric(vec![1.5, 1.6, 1.4]));
        assert_eq!(exo[1].values, ExoValues::Boolean(vec![true, false, true]));
        assert_eq!(
            exo[2].values,
            ExoValues::Categorical {
                codes: vec![0, 1, 0],
                levels: vec!["north".into(), "south".into()],
            }
        );
    }

    #[test]
    fn manifest_carries_sources_ids_and_periods() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "a.csv", "target\n1\n2\n3\n");
        write_file(dir.path(), "b.csv", "target\n4\n5\n6\n");
        let manifest = write_file(
            dir.path(),
            "manifest.csv",
            "path,source,id,period\na.csv,m3,alpha,4\nb.csv,fred,beta,\n",
        );
        let corpus = ingest(&[manifest]).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].series.id, "alpha");
        assert_eq!(corpus[0].source, "m3");
        assert_eq!(corpus[0].series.frequency_hint, Some(4));
        assert_eq!(corpus[1].series.id, "beta");
        assert_eq!(corpus[1].source, "fred");
        assert_eq!(corpus[1].series.frequency_hint, None);
    }

    #[test]
    fn manifest_rejects_unknown_source_tags() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "a.csv", "target\n1\n2\n");
        let manifest = write_file(dir.path(), "manifest.csv", "path,source\na.csv,m6\n");
        let err = ingest(&[manifest]).unwrap_err().to_string();
        assert!(err.contains("m6") && err.contains("row 1"), "{err}");
    }

    #[test]
    fn directories_are_read_file_per_series() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "x.csv", "target\n1\n2\n");
        write_file(dir.path(), "y.csv", "target\n3\n4\n");
        write_file(dir.path(), "notes.txt", "ignored");
        let corpus = ingest(&[dir.path().to_path_buf()]).unwrap();
        let ids: Vec<&str> = corpus.iter().map(|e| e.series.id.as_str()).collect();
        assert_eq!(ids, ["x", "y"]);
    }

    #[test]
    fn duplicate_ids_across_paths_are_rejected() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = write_file(dir_a.path(), "same.csv", "target\n1\n2\n");
        let b = write_file(dir_b.path(), "same.csv", "target\n3\n4\n");
        let err = ingest(&[a, b]).unwrap_err().to_string();
        assert!(err.contains("duplicate series id `same`"), "{err}");
    }

    #[test]
    fn invalid_timestamps_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "t.csv",
            "timestamp,target\n2024-01-01,1\nnot-a-date,2\n",
        );
        let err = ingest(&[path]).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("timestamp"), "{err}");
    }

    #[test]
    fn core_series_validation_is_reported_as_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        // Irregular spacing: 1 day, then 2 days.
        let path = write_file(
            dir.path(),
            "gap.csv",
            "timestamp,target\n2024-01-01,1\n2024-01-02,2\n2024-01-04,3\n",
        );
        let err = ingest(&[path]).unwrap_err();
        assert!(matches!(err, HarnessError::Schema(_)), "{err}");
        assert!(err.to_string().contains("irregular spacing"), "{err}");
    }

    #[test]
    fn datetime_and_space_separated_timestamps_parse() {
        assert!(parse_timestamp("2024-03-05T10:30:00").is_some());
        assert!(parse_timestamp("2024-03-05 10:30:00").is_some());
        assert!(parse_timestamp("2024-03-05").is_some());
        assert!(parse_timestamp("05/03/2024").is_none());
    }
}
