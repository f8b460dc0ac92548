//! Experiment orchestration.
//!
//! One run walks the corpus, splits each series, fits the base pool,
//! evaluates every grid spec, and appends one record per (dataset,
//! algorithm) to the results store. Failures are recorded, never fatal;
//! records already in the store are skipped, so an interrupted run resumes
//! where it stopped. Series are evaluated in parallel batches but written
//! by a single thread in corpus order, which keeps full runs
//! byte-reproducible. The corpus-trained fforma weight model needs every
//! series' validation errors, so fforma records are filled in by a second
//! phase once the rest of the grid is done.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;
use tscombine_core::base_models::{fit_all, fit_base, FittedPool};
use tscombine_core::ensembles::{
    fforma_train, run_spec, EnsembleInput, EnsembleMethod, EnsembleSpec, ExoFeatures,
    FformaExample,
};
use tscombine_core::learners::GbtParams;
use tscombine_core::meta_features::{extract_all, MetaFeatureVector};
use tscombine_core::metrics::smape_custom;
use tscombine_core::preprocess::{detect_seasonality, extract_calendar, SeasonalityInfo};
use tscombine_core::series::{
    ensemble_split_len, split, EnsembleTrainSplit, TimeSeries, DEFAULT_VALID_FRACTION,
};
use tscombine_core::{
    AlgoKind, Error as CoreError, ModelName, RecordStatus, ResultRecord, RngSeed,
};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::ingest::{ingest, IngestedSeries};
use crate::store;
use crate::store::TimingRow;

/// Series per parallel batch; the store is flushed after each batch.
const BATCH: usize = 32;

/// What one run did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub datasets: usize,
    pub new_records: usize,
    pub skipped_records: usize,
    pub store_path: PathBuf,
}

/// One pending evaluation for a series.
#[derive(Clone, Copy)]
enum Pending<'a> {
    Base(ModelName),
    Spec(&'a EnsembleSpec),
}

/// A finished record, or an fforma slot waiting for the corpus model.
enum Slot {
    Done(ResultRecord),
    Fforma(String),
}

/// Everything the fforma phase needs from one series.
struct FformaCarry {
    pool: FittedPool,
    esplit: EnsembleTrainSplit,
    seasonality: SeasonalityInfo,
    exo: Option<ExoFeatures>,
    train_target: Vec<f64>,
    test_actual: Vec<f64>,
    h: usize,
    /// Flattened meta-feature row, aligned with `MetaFeatureVector::row_header()`.
    features: Vec<f64>,
    /// Validation errors aligned with the configured pool; None when a
    /// model was dropped on this series.
    errors: Option<Vec<f64>>,
    seed: RngSeed,
}

struct SeriesEval {
    slots: Vec<Slot>,
    timings: Vec<TimingRow>,
    carry: Option<FformaCarry>,
}

/// Runs (or resumes) the experiment described by a validated config.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    std::fs::create_dir_all(&config.out).map_err(|e| HarnessError::io(&config.out, e))?;
    let snapshot = config.out.join("config.toml");
    std::fs::write(&snapshot, config.canonical_toml()?)
        .map_err(|e| HarnessError::io(&snapshot, e))?;
    let holidays = match &config.holidays {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            Some(tscombine_core::preprocess::parse_holidays(&text)?)
        }
        None => None,
    };

    let corpus = ingest(&config.corpus)?;
    let store_path = config.out.join(store::STORE_FILE);
    let timings_path = config.out.join(store::TIMINGS_FILE);
    let have = store::existing_keys(&store::load_if_present(&store_path)?);

    let fforma_ids: BTreeSet<String> = config
        .grid
        .iter()
        .filter(|s| s.method == EnsembleMethod::Fforma)
        .map(|s| s.to_string())
        .collect();
    let fforma_phase = corpus.iter().any(|entry| {
        fforma_ids.iter().any(|id| !have.contains(&(entry.series.id.clone(), id.clone())))
    });

    // Per-series pending work, in report order (pool, then grid).
    let plan: Vec<(&IngestedSeries, Vec<Pending>)> = corpus
        .iter()
        .map(|entry| {
            let mut pending = Vec::new();
            for &m in &config.pool {
                if !have.contains(&(entry.series.id.clone(), m.to_string())) {
                    pending.push(Pending::Base(m));
                }
            }
            for spec in &config.grid {
                if !have.contains(&(entry.series.id.clone(), spec.to_string())) {
                    pending.push(Pending::Spec(spec));
                }
            }
            (entry, pending)
        })
        .collect();
    let total = corpus.len() * (config.pool.len() + config.grid.len());
    let pending_total: usize = plan.iter().map(|(_, p)| p.len()).sum();
    let skipped_records = total - pending_total;

    let thread_pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("jobs: {e}")))?;
    let run_seed = RngSeed(config.seed).derive("run");

    let mut new_records = 0usize;
    let mut fforma_work: Vec<(String, String, Option<FformaCarry>, Vec<String>)> = Vec::new();
    for batch in plan.chunks(BATCH) {
        let evals: Vec<SeriesEval> = thread_pool.install(|| {
            batch
                .par_iter()
                .map(|(entry, pending)| {
                    eval_series(entry, pending, config, holidays.as_ref(), fforma_phase, run_seed)
                })
                .collect()
        });
        let mut records = Vec::new();
        let mut timings = Vec::new();
        for ((entry, _), eval) in batch.iter().zip(evals) {
            let mut deferred = Vec::new();
            for slot in eval.slots {
                match slot {
                    Slot::Done(record) => records.push(record),
                    Slot::Fforma(id) => deferred.push(id),
                }
            }
            timings.extend(eval.timings);
            if eval.carry.is_some() || !deferred.is_empty() {
                fforma_work.push((
                    entry.series.id.clone(),
                    entry.source.clone(),
                    eval.carry,
                    deferred,
                ));
            }
        }
        new_records += records.len();
        store::append_records(&store_path, &records)?;
        store::append_timings(&timings_path, &timings)?;
    }

    if fforma_phase {
        let (records, timings) = fforma_records(config, fforma_work)?;
        new_records += records.len();
        store::append_records(&store_path, &records)?;
        store::append_timings(&timings_path, &timings)?;
    }

    log::info!(
        "run complete: {} datasets, {} new records, {} already present",
        corpus.len(),
        new_records,
        skipped_records
    );
    Ok(RunOutcome { datasets: corpus.len(), new_records, skipped_records, store_path })
}

/// Joins a core error into a failed record's log line.
fn warn_failed(dataset: &str, algorithm: &str, err: &CoreError) {
    log::warn!("{dataset}/{algorithm} failed: {err}");
}

fn eval_series(
    entry: &IngestedSeries,
    pending: &[Pending],
    config: &RunConfig,
    holidays: Option<&BTreeSet<NaiveDate>>,
    fforma_phase: bool,
    run_seed: RngSeed,
) -> SeriesEval {
    let id = entry.series.id.as_str();
    let source = entry.source.as_str();
    let seed = run_seed.derive(id);
    let mut slots = Vec::with_capacity(pending.len());
    let mut timings = Vec::with_capacity(pending.len());
    let failed = |alg: &str, kind: AlgoKind| {
        Slot::Done(ResultRecord::without_value(id, alg, kind, source, RecordStatus::Failed))
    };
    let kind_of = |p: &Pending| match p {
        Pending::Base(_) => AlgoKind::Base,
        Pending::Spec(_) => AlgoKind::Ensemble,
    };
    let name_of = |p: &Pending| match p {
        Pending::Base(m) => m.to_string(),
        Pending::Spec(s) => s.to_string(),
    };

    let (train, test) = match split(&entry.series, config.split.to_spec()) {
        Ok(pair) => pair,
        Err(e) => {
            log::warn!("{id}: unsplittable, all records failed: {e}");
            for p in pending {
                slots.push(failed(&name_of(p), kind_of(p)));
            }
            return SeriesEval { slots, timings, carry: None };
        }
    };
    let h = test.len();
    let seasonality = detect_seasonality(&train.target);
    let exo = build_exo(&entry.series, train.len(), h, holidays);
    let period = seasonality.primary_period().or(entry.series.frequency_hint);
    let fitted = ensemble_split_len(train.len(), DEFAULT_VALID_FRACTION, period)
        .and_then(|esplit| Ok((fit_all(&config.pool, &train.target, &esplit, &seasonality, h)?, esplit)));
    let (pool, esplit) = match fitted {
        Ok((pool, esplit)) => (Some(pool), Some(esplit)),
        Err(e) => {
            log::warn!("{id}: base pool unavailable for ensembles: {e}");
            (None, None)
        }
    };

    // Grades one forecast against the held-out window.
    let graded = |alg: &str, kind: AlgoKind, forecast: &[f64]| match smape_custom(&test.target, forecast) {
        Ok(v) => Slot::Done(ResultRecord::ok(id, alg, kind, source, v)),
        Err(CoreError::ZeroDenominator) => {
            Slot::Done(ResultRecord::without_value(id, alg, kind, source, RecordStatus::Excluded))
        }
        Err(e) => {
            warn_failed(id, alg, &e);
            failed(alg, kind)
        }
    };

    let features = if fforma_phase {
        match extract_all(&train, &seasonality) {
            Ok(v) => Some(v.to_row()),
            Err(e) => {
                log::warn!("{id}: meta-features unavailable: {e}");
                None
            }
        }
    } else {
        None
    };

    for p in pending {
        let alg = name_of(p);
        let started = Instant::now();
        let slot = match p {
            Pending::Base(m) => match &pool {
                Some(pool) => match pool.test.row(&alg) {
                    Some(forecast) => graded(&alg, AlgoKind::Base, forecast),
                    None => {
                        if let Some((_, reason)) = pool.dropped.iter().find(|(d, _)| d == m) {
                            log::warn!("{id}/{alg} dropped: {reason}");
                        }
                        failed(&alg, AlgoKind::Base)
                    }
                },
                // The ensemble split failed but a standalone fit may still work.
                None => match fit_base(*m, &train.target, &seasonality) {
                    Ok((forecaster, _)) => graded(&alg, AlgoKind::Base, &forecaster.predict(h)),
                    Err(e) => {
                        warn_failed(id, &alg, &e);
                        failed(&alg, AlgoKind::Base)
                    }
                },
            },
            Pending::Spec(spec) => match (&pool, &esplit) {
                (Some(pool), Some(esplit)) => {
                    if spec.method == EnsembleMethod::Fforma {
                        if features.is_some() {
                            Slot::Fforma(alg.clone())
                        } else {
                            failed(&alg, AlgoKind::Ensemble)
                        }
                    } else {
                        let input = EnsembleInput {
                            train: &train.target,
                            h,
                            split: esplit,
                            seasonality: &seasonality,
                            pool,
                            exo: exo.as_ref(),
                            fforma: None,
                            features: None,
                            seed: seed.derive(&alg),
                        };
                        match run_spec(spec, &input) {
                            Ok(out) => graded(&alg, AlgoKind::Ensemble, &out.forecast),
                            Err(e) => {
                                warn_failed(id, &alg, &e);
                                failed(&alg, AlgoKind::Ensemble)
                            }
                        }
                    }
                }
                _ => failed(&alg, AlgoKind::Ensemble),
            },
        };
        timings.push((id.to_string(), alg, started.elapsed().as_millis() as u64));
        slots.push(slot);
    }

    // The weight-model corpus wants every series with a full pool, even ones
    // whose own records are all present already.
    let carry = match (fforma_phase, pool, esplit, features) {
        (true, Some(pool), Some(esplit), Some(features)) => {
            let errors = if pool.dropped.is_empty() {
                Some(pool.reports.iter().map(|(_, r)| r.training_error).collect())
            } else {
                log::warn!("{id}: dropped models, excluded from the fforma corpus");
                None
            };
            Some(FformaCarry {
                pool,
                esplit,
                seasonality,
                exo,
                train_target: train.target,
                test_actual: test.target,
                h,
                features,
                errors,
                seed,
            })
        }
        _ => None,
    };
    SeriesEval { slots, timings, carry }
}

/// Trains the corpus weight model and fills every deferred fforma slot.
fn fforma_records(
    config: &RunConfig,
    work: Vec<(String, String, Option<FformaCarry>, Vec<String>)>,
) -> Result<(Vec<ResultRecord>, Vec<TimingRow>)> {
    let pool_ids: Vec<String> = config.pool.iter().map(|m| m.to_string()).collect();
    let feature_names = MetaFeatureVector::row_header();
    let examples: Vec<FformaExample> = work
        .iter()
        .filter_map(|(_, _, carry, _)| carry.as_ref())
        .filter_map(|c| {
            c.errors
                .as_ref()
                .map(|errors| FformaExample { features: c.features.clone(), errors: errors.clone() })
        })
        .collect();
    let model = match fforma_train(&pool_ids, &feature_names, &examples, GbtParams::default()) {
        Ok(model) => {
            let path = config.out.join("fforma.json");
            let text = serde_json::to_string_pretty(&model)
                .map_err(|e| HarnessError::Config(format!("fforma model serialization: {e}")))?;
            std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
            Some(model)
        }
        Err(e) => {
            log::warn!("fforma model unavailable ({} examples): {e}", examples.len());
            None
        }
    };

    let mut records = Vec::new();
    let mut timings = Vec::new();
    for (id, source, carry, deferred) in &work {
        for alg in deferred {
            let started = Instant::now();
            let record = match (&model, carry) {
                (Some(model), Some(c)) => {
                    let spec: EnsembleSpec = alg.parse().expect("store ids are canonical");
                    let input = EnsembleInput {
                        train: &c.train_target,
                        h: c.h,
                        split: &c.esplit,
                        seasonality: &c.seasonality,
                        pool: &c.pool,
                        exo: c.exo.as_ref(),
                        fforma: Some(model),
                        features: Some(&c.features),
                        seed: c.seed.derive(alg),
                    };
                    match run_spec(&spec, &input) {
                        Ok(out) => match smape_custom(&c.test_actual, &out.forecast) {
                            Ok(v) => {
                                ResultRecord::ok(id, alg, AlgoKind::Ensemble, source, v)
                            }
                            Err(CoreError::ZeroDenominator) => ResultRecord::without_value(
                                id,
                                alg,
                                AlgoKind::Ensemble,
                                source,
                                RecordStatus::Excluded,
                            ),
                            Err(e) => {
                                warn_failed(id, alg, &e);
                                ResultRecord::without_value(
                                    id,
                                    alg,
                                    AlgoKind::Ensemble,
                                    source,
                                    RecordStatus::Failed,
                                )
                            }
                        },
                        Err(e) => {
                            warn_failed(id, alg, &e);
                            ResultRecord::without_value(
                                id,
                                alg,
                                AlgoKind::Ensemble,
                                source,
                                RecordStatus::Failed,
                            )
                        }
                    }
                }
                _ => ResultRecord::without_value(
                    id,
                    alg,
                    AlgoKind::Ensemble,
                    source,
                    RecordStatus::Failed,
                ),
            };
            timings.push((id.clone(), alg.clone(), started.elapsed().as_millis() as u64));
            records.push(record);
        }
    }
    Ok((records, timings))
}

/// Joins the series' own exogenous columns with calendar features over the
/// train window and the forecast horizon.
fn build_exo(
    series: &TimeSeries,
    train_len: usize,
    h: usize,
    holidays: Option<&BTreeSet<NaiveDate>>,
) -> Option<ExoFeatures> {
    let mut columns: Vec<(String, Vec<f64>)> =
        series.exogenous.iter().map(|c| (c.name.clone(), c.values.as_numeric())).collect();
    if series.timestamps.is_some() {
        match extract_calendar(series, holidays) {
            Ok(calendar) => columns
                .extend(calendar.columns.into_iter().map(|c| (c.name, c.values.as_numeric()))),
            Err(e) => log::warn!("{}: no calendar features: {e}", series.id),
        }
    }
    if columns.is_empty() {
        return None;
    }
    let row = |t: usize| columns.iter().map(|(_, v)| v[t]).collect::<Vec<f64>>();
    Some(ExoFeatures {
        names: columns.iter().map(|(n, _)| n.clone()).collect(),
        train_rows: (0..train_len).map(row).collect(),
        test_rows: (train_len..train_len + h).map(row).collect(),
    })
}
