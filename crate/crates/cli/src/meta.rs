//! The meta-learning pipeline over a finished results store.
//!
//! The corpus is partitioned into disjoint train/test halves; for each
//! label cutoff K the per-spec selectors are trained on the training half
//! and evaluated on the test half against the autorank and random
//! baselines at matched selection size. The output is the (K, N, R) curve
//! table, where N is the average number of selected ensembles and R the
//! average rank of the best selected one, plus the baseline − meta rank
//! difference series.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::Rng;
use tscombine_core::meta_features::MetaFeatureVector;
use tscombine_core::meta_learner::{
    baseline_autorank, baseline_random, build_meta_dataset, check_partition, evaluate_selection,
    select, train_selectors, MetaDataset, MetaEvalPoint, SelectorModel,
};
use tscombine_core::metrics::{rank_results, RankTable};
use tscombine_core::preprocess::detect_seasonality;
use tscombine_core::series::split;
use tscombine_core::{AlgoKind, Error as CoreError, RecordStatus, ResultRecord, RngSeed};

use crate::config::SplitConfig;
use crate::error::{HarnessError, Result};
use crate::ingest::IngestedSeries;

/// Meta-pipeline knobs; the defaults mirror the harness CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaOptions {
    pub k_values: Vec<usize>,
    /// Fraction of datasets in the selector-training corpus.
    pub train_fraction: f64,
    /// Random-baseline draws averaged per (K, dataset).
    pub random_reps: usize,
    pub seed: u64,
}

impl Default for MetaOptions {
    fn default() -> MetaOptions {
        MetaOptions { k_values: (1..=15).collect(), train_fraction: 0.8, random_reps: 10, seed: 0 }
    }
}

/// One K of the evaluation curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub meta: MetaEvalPoint,
    pub autorank: MetaEvalPoint,
    pub random: MetaEvalPoint,
}

/// Everything the pipeline stages share.
pub struct MetaContext {
    pub train_records: Vec<ResultRecord>,
    pub test_records: Vec<ResultRecord>,
    pub features: BTreeMap<String, MetaFeatureVector>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub train_table: RankTable,
    pub test_table: RankTable,
    pub seed: RngSeed,
}

/// A deterministic seeded shuffle split; both halves come back sorted.
pub fn partition_ids(
    ids: &[String],
    train_fraction: f64,
    seed: RngSeed,
) -> (Vec<String>, Vec<String>) {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let mut rng = seed.rng();
    for i in 0..order.len() {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    let n_train = ((train_fraction * ids.len() as f64).round() as usize)
        .clamp(1, ids.len().saturating_sub(1).max(1));
    let mut train: Vec<String> = order[..n_train].iter().map(|&i| ids[i].clone()).collect();
    let mut test: Vec<String> = order[n_train..].iter().map(|&i| ids[i].clone()).collect();
    train.sort();
    test.sort();
    (train, test)
}

/// Meta-features of each series' training window, keyed by id. Series too
/// short or too degenerate to featurize are skipped with a warning.
pub fn corpus_features(
    corpus: &[IngestedSeries],
    split_config: SplitConfig,
) -> BTreeMap<String, MetaFeatureVector> {
    let mut features = BTreeMap::new();
    for entry in corpus {
        let extracted = split(&entry.series, split_config.to_spec()).and_then(|(train, _)| {
            let seasonality = detect_seasonality(&train.target);
            tscombine_core::meta_features::extract_all(&train, &seasonality)
        });
        match extracted {
            Ok(v) => {
                features.insert(entry.series.id.clone(), v);
            }
            Err(e) => log::warn!("{}: no meta-features: {e}", entry.series.id),
        }
    }
    features
}

/// Keeps the ensemble records of datasets whose grid is fully `ok` and
/// which have meta-features; everything else is dropped with a warning.
fn complete_ensemble_records(
    records: &[ResultRecord],
    features: &BTreeMap<String, MetaFeatureVector>,
) -> Result<Vec<ResultRecord>> {
    let ensembles: Vec<&ResultRecord> =
        records.iter().filter(|r| r.kind == AlgoKind::Ensemble).collect();
    let grid: BTreeSet<&str> = ensembles.iter().map(|r| r.algorithm_id.as_str()).collect();
    if grid.is_empty() {
        return Err(CoreError::IncompleteGrid("the store holds no ensemble records".into()).into());
    }
    let mut ok_by_dataset: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in &ensembles {
        if r.status == RecordStatus::Ok {
            ok_by_dataset.entry(&r.dataset_id).or_default().insert(&r.algorithm_id);
        }
    }
    let complete: BTreeSet<&str> = ok_by_dataset
        .iter()
        .filter(|(id, ok)| {
            if ok.len() != grid.len() {
                log::warn!("{id}: incomplete ensemble grid, dropped from meta-learning");
                return false;
            }
            if !features.contains_key(**id) {
                log::warn!("{id}: no meta-features, dropped from meta-learning");
                return false;
            }
            true
        })
        .map(|(id, _)| *id)
        .collect();
    if complete.is_empty() {
        return Err(CoreError::IncompleteGrid(
            "no dataset has every ensemble+HP evaluated successfully".into(),
        )
        .into());
    }
    Ok(ensembles
        .into_iter()
        .filter(|r| complete.contains(r.dataset_id.as_str()))
        .cloned()
        .collect())
}

/// Builds the shared stage context: complete records, features, partition,
/// and both rank tables.
pub fn prepare(
    records: &[ResultRecord],
    corpus: &[IngestedSeries],
    split_config: SplitConfig,
    opts: &MetaOptions,
) -> Result<MetaContext> {
    let features = corpus_features(corpus, split_config);
    let usable = complete_ensemble_records(records, &features)?;
    let ids: Vec<String> = usable
        .iter()
        .map(|r| r.dataset_id.clone())
        .collect::<BTreeSet<String>>()
        .into_iter()
        .collect();
    if ids.len() < 2 {
        return Err(HarnessError::Config(format!(
            "meta-learning needs at least 2 usable datasets, got {}",
            ids.len()
        )));
    }
    let seed = RngSeed(opts.seed).derive("meta");
    let (train_ids, test_ids) = partition_ids(&ids, opts.train_fraction, seed.derive("partition"));
    check_partition(&train_ids, &test_ids)?;
    let train_set: BTreeSet<&str> = train_ids.iter().map(String::as_str).collect();
    let (train_records, test_records): (Vec<ResultRecord>, Vec<ResultRecord>) =
        usable.into_iter().partition(|r| train_set.contains(r.dataset_id.as_str()));
    let train_table = rank_results(&train_records)?;
    let test_table = rank_results(&test_records)?;
    Ok(MetaContext {
        train_records,
        test_records,
        features,
        train_ids,
        test_ids,
        train_table,
        test_table,
        seed,
    })
}

impl MetaContext {
    pub fn train_dataset(&self, k: usize) -> Result<MetaDataset> {
        Ok(build_meta_dataset(&self.train_records, &self.features, k)?)
    }

    pub fn train_model(&self, k: usize) -> Result<SelectorModel> {
        let meta = self.train_dataset(k)?;
        Ok(train_selectors(&meta, self.seed.derive("selectors").derive_index(k as u64))?)
    }

    /// Applies a trained model to every test dataset.
    pub fn test_selections(&self, model: &SelectorModel) -> Result<BTreeMap<String, Vec<String>>> {
        let mut selections = BTreeMap::new();
        for id in &self.test_ids {
            let features = self.features.get(id).expect("complete datasets are featurized");
            selections.insert(id.clone(), select(model, features)?);
        }
        Ok(selections)
    }

    /// One curve point: the meta-learner and both baselines at matched N.
    pub fn curve_point(&self, k: usize, random_reps: usize) -> Result<CurvePoint> {
        let model = self.train_model(k)?;
        let selections = self.test_selections(&model)?;
        let meta = evaluate_selection(&self.test_table, &selections, k);
        let grid = &self.test_table.algorithms;
        let n_matched = (meta.n.round() as usize).clamp(1, grid.len());

        let mean_ranks: Vec<f64> = self
            .train_table
            .mean_ranks
            .iter()
            .map(|r| r.unwrap_or(f64::INFINITY))
            .collect();
        let picked = baseline_autorank(&self.train_table.algorithms, &mean_ranks, n_matched);
        let fixed: BTreeMap<String, Vec<String>> =
            self.test_ids.iter().map(|id| (id.clone(), picked.clone())).collect();
        let autorank = evaluate_selection(&self.test_table, &fixed, k);

        let random_seed = self.seed.derive("random").derive_index(k as u64);
        let mut r_sum = 0.0;
        let mut n_sum = 0.0;
        for rep in 0..random_reps.max(1) {
            let rep_seed = random_seed.derive_index(rep as u64);
            let draws: BTreeMap<String, Vec<String>> = self
                .test_ids
                .iter()
                .map(|id| (id.clone(), baseline_random(grid, n_matched, rep_seed.derive(id))))
                .collect();
            let point = evaluate_selection(&self.test_table, &draws, k);
            r_sum += point.r;
            n_sum += point.n;
        }
        let reps = random_reps.max(1) as f64;
        let random = MetaEvalPoint { k, n: n_sum / reps, r: r_sum / reps };
        Ok(CurvePoint { k, meta, autorank, random })
    }
}

/// The full sweep: one curve point per K, written as CSV and SVG.
pub fn meta_pipeline(
    records: &[ResultRecord],
    corpus: &[IngestedSeries],
    split_config: SplitConfig,
    opts: &MetaOptions,
    out: &Path,
) -> Result<(Vec<CurvePoint>, Vec<PathBuf>)> {
    let context = prepare(records, corpus, split_config, opts)?;
    let mut curves = Vec::with_capacity(opts.k_values.len());
    for &k in &opts.k_values {
        curves.push(context.curve_point(k, opts.random_reps)?);
    }
    let dir = meta_dir(out)?;
    let mut files = vec![write_partition(&context, &dir)?, write_curves(&curves, &dir)?];
    let svg = dir.join("curves.svg");
    std::fs::write(&svg, curves_svg(&curves)).map_err(|e| HarnessError::io(&svg, e))?;
    files.push(svg);
    Ok((curves, files))
}

pub fn meta_dir(out: &Path) -> Result<PathBuf> {
    let dir = out.join("meta");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    Ok(dir)
}

fn write_partition(context: &MetaContext, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("partition.csv");
    let mut text = String::from("dataset_id,split\n");
    for id in &context.train_ids {
        text.push_str(&format!("{id},train\n"));
    }
    for id in &context.test_ids {
        text.push_str(&format!("{id},test\n"));
    }
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

fn write_curves(curves: &[CurvePoint], dir: &Path) -> Result<PathBuf> {
    let path = dir.join("curves.csv");
    let mut text = String::from(
        "k,meta_n,meta_r,autorank_n,autorank_r,random_n,random_r,autorank_minus_meta_r,random_minus_meta_r\n",
    );
    for p in curves {
        text.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            p.k,
            p.meta.n,
            p.meta.r,
            p.autorank.n,
            p.autorank.r,
            p.random.n,
            p.random.r,
            p.autorank.r - p.meta.r,
            p.random.r - p.meta.r,
        ));
    }
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

/// Writes the train-side meta-dataset (features plus one 0/1 target column
/// per spec) for one K.
pub fn write_meta_dataset(meta: &MetaDataset, dir: &Path, k: usize) -> Result<PathBuf> {
    let path = dir.join(format!("dataset_k{k}.csv"));
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset_id".to_string()];
    header.extend(meta.feature_names.iter().cloned());
    header.extend(meta.algo_ids.iter().cloned());
    writer.write_record(&header).map_err(|e| HarnessError::csv(&path, e))?;
    for ((id, row), targets) in meta.series_ids.iter().zip(&meta.rows).zip(&meta.targets) {
        let mut record = vec![id.clone()];
        record.extend(row.iter().map(|v| format!("{v:.9}")));
        record.extend(targets.iter().map(|t| t.to_string()));
        writer.write_record(&record).map_err(|e| HarnessError::csv(&path, e))?;
    }
    let bytes = writer.into_inner().expect("vec writer never fails");
    std::fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

/// Persists a trained selector bank as JSON next to its feature-usage table.
pub fn write_selectors(model: &SelectorModel, dir: &Path, k: usize) -> Result<Vec<PathBuf>> {
    let model_path = dir.join(format!("selectors_k{k}.json"));
    let text = serde_json::to_string_pretty(model)
        .map_err(|e| HarnessError::Config(format!("selector serialization: {e}")))?;
    std::fs::write(&model_path, text).map_err(|e| HarnessError::io(&model_path, e))?;

    let usage_path = dir.join(format!("feature_usage_k{k}.csv"));
    let mut text = String::from("feature,splits\n");
    for (name, count) in model.feature_usage() {
        text.push_str(&format!("{name},{count}\n"));
    }
    std::fs::write(&usage_path, text).map_err(|e| HarnessError::io(&usage_path, e))?;
    Ok(vec![model_path, usage_path])
}

pub fn load_selectors(path: &Path) -> Result<SelectorModel> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("`{}`: {e}", path.display())))
}

pub fn write_selections(
    selections: &BTreeMap<String, Vec<String>>,
    dir: &Path,
    k: usize,
) -> Result<PathBuf> {
    let path = dir.join(format!("selections_k{k}.csv"));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["dataset_id", "n_selected", "selected"])
        .map_err(|e| HarnessError::csv(&path, e))?;
    for (id, specs) in selections {
        writer
            .write_record([id.as_str(), &specs.len().to_string(), &specs.join("|")])
            .map_err(|e| HarnessError::csv(&path, e))?;
    }
    let bytes = writer.into_inner().expect("vec writer never fails");
    std::fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

/// R-vs-K polylines for the meta-learner and both baselines.
fn curves_svg(curves: &[CurvePoint]) -> String {
    const WIDTH: f64 = 720.0;
    const HEIGHT: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let k_min = curves.iter().map(|p| p.k).min().unwrap_or(1) as f64;
    let k_max = curves.iter().map(|p| p.k).max().unwrap_or(1).max(2) as f64;
    let r_max = curves
        .iter()
        .flat_map(|p| [p.meta.r, p.autorank.r, p.random.r])
        .fold(1.0_f64, f64::max);
    let x = |k: f64| MARGIN + (k - k_min) / (k_max - k_min).max(1.0) * (WIDTH - 2.0 * MARGIN);
    let y = |r: f64| HEIGHT - MARGIN - (r - 1.0) / (r_max - 1.0).max(1e-9) * (HEIGHT - 2.0 * MARGIN);
    let polyline = |points: Vec<(f64, f64)>, color: &str| {
        let path: Vec<String> =
            points.iter().map(|(px, py)| format!("{:.1},{:.1}", x(*px), y(*py))).collect();
        format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        )
    };
    let series = |f: fn(&CurvePoint) -> f64| -> Vec<(f64, f64)> {
        curves.iter().map(|p| (p.k as f64, f(p))).collect()
    };
    let mut body = String::new();
    body.push_str("  <text x=\"10\" y=\"22\" font-size=\"15\" font-family=\"sans-serif\">Average best selected rank R vs label cutoff K</text>\n");
    body.push_str(&format!(
        "  <line x1=\"{MARGIN}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    ));
    body.push_str(&format!(
        "  <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN
    ));
    body.push_str(&polyline(series(|p| p.random.r), "#c05050"));
    body.push_str(&polyline(series(|p| p.autorank.r), "#808080"));
    body.push_str(&polyline(series(|p| p.meta.r), "#3060b0"));
    for (label, color, dy) in
        [("meta", "#3060b0", 0.0), ("autorank", "#808080", 16.0), ("random", "#c05050", 32.0)]
    {
        body.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\" fill=\"{color}\">{label}</text>\n",
            WIDTH - MARGIN - 70.0,
            MARGIN + 14.0 + dy
        ));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\">\n{body}</svg>\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use tscombine_core::series::TimeSeries;

    fn synthetic_corpus(n: usize) -> Vec<IngestedSeries> {
        (0..n)
            .map(|i| {
                let target: Vec<f64> = (0..60)
                    .map(|t| {
                        let t = t as f64;
                        10.0 + 0.2 * (i % 7) as f64 * t
                            + ((t * 0.7 + i as f64) * 2.1).sin() * (1.0 + (i % 3) as f64)
                    })
                    .collect();
                IngestedSeries {
                    series: TimeSeries::from_values(format!("s{i:03}"), target).unwrap(),
                    source: "other".to_string(),
                }
            })
            .collect()
    }

    /// e1 is always best, e2 second, e3 worst; smapes stay distinct.
    fn synthetic_records(corpus: &[IngestedSeries]) -> Vec<ResultRecord> {
        let mut records = Vec::new();
        for (i, entry) in corpus.iter().enumerate() {
            let id = &entry.series.id;
            let base = 5.0 + i as f64 * 0.01;
            records.push(ResultRecord::ok(id, "e1", AlgoKind::Ensemble, "other", base));
            records.push(ResultRecord::ok(id, "e2", AlgoKind::Ensemble, "other", base + 1.0));
            records.push(ResultRecord::ok(id, "e3", AlgoKind::Ensemble, "other", base + 2.0));
            records.push(ResultRecord::ok(id, "naive", AlgoKind::Base, "other", base + 9.0));
        }
        records
    }

    fn options(k_values: Vec<usize>) -> MetaOptions {
        MetaOptions { k_values, train_fraction: 0.8, random_reps: 3, seed: 7 }
    }

    #[test]
    fn partition_is_deterministic_disjoint_and_sized() {
        let ids: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
        let seed = RngSeed(1).derive("partition");
        let (train_a, test_a) = partition_ids(&ids, 0.8, seed);
        let (train_b, test_b) = partition_ids(&ids, 0.8, seed);
        assert_eq!((train_a.clone(), test_a.clone()), (train_b, test_b));
        assert_eq!(train_a.len(), 8);
        assert_eq!(test_a.len(), 2);
        check_partition(&train_a, &test_a).unwrap();
        let mut all: Vec<String> = train_a.into_iter().chain(test_a).collect();
        all.sort();
        assert_eq!(all, ids);
    }

    #[test]
    fn pipeline_learns_the_dominant_spec() {
        let out = tempfile::tempdir().unwrap();
        let corpus = synthetic_corpus(30);
        let records = synthetic_records(&corpus);
        let (curves, files) = meta_pipeline(
            &records,
            &corpus,
            SplitConfig::Horizon(6),
            &options(vec![1, 2, 3]),
            out.path(),
        )
        .unwrap();
        assert_eq!(curves.len(), 3);
        // K=1 labels only e1; every strategy that finds it reaches R=1.
        let first = &curves[0];
        assert_eq!(first.k, 1);
        assert!((first.meta.r - 1.0).abs() < 1e-12, "meta R = {}", first.meta.r);
        assert!((first.autorank.r - 1.0).abs() < 1e-12);
        assert!(first.random.r >= 1.0);
        // K = grid size saturates the labels: everything selected, R = 1.
        let last = &curves[2];
        assert!((last.meta.n - 3.0).abs() < 1e-12, "meta N = {}", last.meta.n);
        assert!((last.meta.r - 1.0).abs() < 1e-12);
        assert_eq!(files.len(), 3);
        for f in &files {
            assert!(f.exists(), "{}", f.display());
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let corpus = synthetic_corpus(30);
        let records = synthetic_records(&corpus);
        let read = |dir: &Path| -> String {
            let (_, files) = meta_pipeline(
                &records,
                &corpus,
                SplitConfig::Horizon(6),
                &options(vec![1, 2]),
                dir,
            )
            .unwrap();
            std::fs::read_to_string(&files[1]).unwrap()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn incomplete_datasets_are_dropped_not_fatal() {
        let out = tempfile::tempdir().unwrap();
        let corpus = synthetic_corpus(31);
        let mut records = synthetic_records(&corpus);
        // Break the grid on the last dataset only.
        let id = corpus.last().unwrap().series.id.clone();
        records.retain(|r| !(r.dataset_id == id && r.algorithm_id == "e2"));
        let (curves, _) = meta_pipeline(
            &records,
            &corpus,
            SplitConfig::Horizon(6),
            &options(vec![1]),
            out.path(),
        )
        .unwrap();
        assert_eq!(curves.len(), 1);
    }

    #[test]
    fn all_incomplete_grids_raise_incomplete_grid() {
        let out = tempfile::tempdir().unwrap();
        let corpus = synthetic_corpus(25);
        let mut records = synthetic_records(&corpus);
        records.retain(|r| r.algorithm_id != "e2" || r.dataset_id == "does-not-exist");
        // e2 still appears in no dataset, yet naive keeps non-ensemble rows.
        records.push(ResultRecord::without_value(
            "s000",
            "e2",
            AlgoKind::Ensemble,
            "other",
            RecordStatus::Failed,
        ));
        let err = meta_pipeline(
            &records,
            &corpus,
            SplitConfig::Horizon(6),
            &options(vec![1]),
            out.path(),
        )
        .unwrap_err();
        assert!(
            matches!(err, HarnessError::Core(CoreError::IncompleteGrid(_))),
            "{err}"
        );
    }

    #[test]
    fn stage_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = synthetic_corpus(30);
        let records = synthetic_records(&corpus);
        let context =
            prepare(&records, &corpus, SplitConfig::Horizon(6), &options(vec![2])).unwrap();
        let meta = context.train_dataset(2).unwrap();
        let dataset_path = write_meta_dataset(&meta, dir.path(), 2).unwrap();
        let text = std::fs::read_to_string(&dataset_path).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("dataset_id,"));
        assert!(header.ends_with("e1,e2,e3"), "{header}");
        assert_eq!(text.lines().count(), meta.series_ids.len() + 1);

        let model = context.train_model(2).unwrap();
        let files = write_selectors(&model, dir.path(), 2).unwrap();
        let loaded = load_selectors(&files[0]).unwrap();
        assert_eq!(loaded, model);

        let selections = context.test_selections(&loaded).unwrap();
        let path = write_selections(&selections, dir.path(), 2).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), context.test_ids.len() + 1);
    }
}
