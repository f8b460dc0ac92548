//! The `tscombine` command line: `run`, `report`, `meta`, and `inspect`
//! over a TOML run config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tscombine_cli::config::RunConfig;
use tscombine_cli::error::{HarnessError, Result};
use tscombine_cli::meta::{self, MetaOptions};
use tscombine_cli::reports::{generate_report, ReportKind};
use tscombine_cli::{ingest, run, store};
use tscombine_core::meta_features::extract_all;
use tscombine_core::preprocess::detect_seasonality;
use tscombine_core::series::ExoValues;

#[derive(Debug, Parser)]
#[command(name = "tscombine", version, about = "Forecast-ensemble experiment harness")]
struct Cli {
    /// Run config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config parallelism degree.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluates every (series, algorithm) pair missing from the store.
    Run,
    /// Generates report files from the results store.
    Report {
        #[arg(value_enum)]
        kind: ReportKindArg,
    },
    /// Meta-learning stages over a finished store.
    Meta {
        #[command(subcommand)]
        stage: MetaStage,
    },
    /// Prints one series' shape, schema, and meta-features.
    Inspect { dataset_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportKindArg {
    Ranks,
    Wins,
    Cd,
    PerSource,
}

impl From<ReportKindArg> for ReportKind {
    fn from(kind: ReportKindArg) -> ReportKind {
        match kind {
            ReportKindArg::Ranks => ReportKind::Ranks,
            ReportKindArg::Wins => ReportKind::Wins,
            ReportKindArg::Cd => ReportKind::Cd,
            ReportKindArg::PerSource => ReportKind::PerSource,
        }
    }
}

#[derive(Debug, Subcommand)]
enum MetaStage {
    /// Writes the labeled meta-dataset for one K.
    Build {
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Trains and saves the per-spec selector bank for one K.
    Train {
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Applies saved selectors to the test corpus.
    Select {
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Sweeps K and writes the (K, N, R) curves against both baselines.
    Eval {
        #[arg(long, default_value_t = 15)]
        k_max: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| HarnessError::Config("--config <file> is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn meta_options(config: &RunConfig, k_values: Vec<usize>) -> MetaOptions {
    MetaOptions { k_values, seed: config.seed, ..MetaOptions::default() }
}

fn execute(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Run => {
            let outcome = run::run_experiment(&config)?;
            println!(
                "run: {} datasets, {} new records, {} already present -> {}",
                outcome.datasets,
                outcome.new_records,
                outcome.skipped_records,
                outcome.store_path.display()
            );
        }
        Command::Report { kind } => {
            let records = store::load_records(&config.out.join(store::STORE_FILE))?;
            for file in generate_report(&records, kind.into(), &config.out)? {
                println!("wrote {}", file.display());
            }
        }
        Command::Meta { stage } => {
            let records = store::load_records(&config.out.join(store::STORE_FILE))?;
            let corpus = ingest::ingest(&config.corpus)?;
            let dir = meta::meta_dir(&config.out)?;
            match stage {
                MetaStage::Build { k } => {
                    let context =
                        meta::prepare(&records, &corpus, config.split, &meta_options(&config, vec![k]))?;
                    let path = meta::write_meta_dataset(&context.train_dataset(k)?, &dir, k)?;
                    println!("wrote {}", path.display());
                }
                MetaStage::Train { k } => {
                    let context =
                        meta::prepare(&records, &corpus, config.split, &meta_options(&config, vec![k]))?;
                    for path in meta::write_selectors(&context.train_model(k)?, &dir, k)? {
                        println!("wrote {}", path.display());
                    }
                }
                MetaStage::Select { k } => {
                    let model_path = dir.join(format!("selectors_k{k}.json"));
                    if !model_path.exists() {
                        return Err(HarnessError::Config(format!(
                            "no saved selectors at `{}`; run `meta train --k {k}` first",
                            model_path.display()
                        )));
                    }
                    let model = meta::load_selectors(&model_path)?;
                    let context =
                        meta::prepare(&records, &corpus, config.split, &meta_options(&config, vec![k]))?;
                    let selections = context.test_selections(&model)?;
                    let path = meta::write_selections(&selections, &dir, k)?;
                    println!("wrote {}", path.display());
                }
                MetaStage::Eval { k_max } => {
                    if k_max == 0 {
                        return Err(HarnessError::Config("--k-max must be ≥ 1".into()));
                    }
                    let opts = meta_options(&config, (1..=k_max).collect());
                    let (curves, files) =
                        meta::meta_pipeline(&records, &corpus, config.split, &opts, &config.out)?;
                    println!("k,meta_r,autorank_r,random_r");
                    for p in &curves {
                        println!(
                            "{},{:.4},{:.4},{:.4}",
                            p.k, p.meta.r, p.autorank.r, p.random.r
                        );
                    }
                    for file in files {
                        println!("wrote {}", file.display());
                    }
                }
            }
        }
        Command::Inspect { dataset_id } => {
            let corpus = ingest::ingest(&config.corpus)?;
            let entry = corpus
                .iter()
                .find(|e| e.series.id == dataset_id)
                .ok_or_else(|| HarnessError::Config(format!("unknown dataset `{dataset_id}`")))?;
            inspect(entry);
        }
    }
    Ok(())
}

fn inspect(entry: &ingest::IngestedSeries) {
    let series = &entry.series;
    println!("series {} (source {})", series.id, entry.source);
    println!("  length: {}", series.len());
    match series.spacing_seconds() {
        Some(s) => println!("  spacing: {s}s"),
        None => println!("  spacing: none (no timestamps)"),
    }
    match series.frequency_hint {
        Some(m) => println!("  frequency hint: {m}"),
        None => println!("  frequency hint: none"),
    }
    for col in &series.exogenous {
        let kind = match col.values {
            ExoValues::Numeric(_) => "numeric",
            ExoValues::Boolean(_) => "boolean",
            ExoValues::Categorical { .. } => "categorical",
        };
        println!("  exogenous: {} ({kind})", col.name);
    }
    let seasonality = detect_seasonality(&series.target);
    match seasonality.primary_period() {
        Some(m) => println!("  primary period: {m}"),
        None => println!("  primary period: none detected"),
    }
    if let Some(m) = seasonality.secondary_period() {
        println!("  secondary period: {m}");
    }
    match extract_all(series, &seasonality) {
        Ok(features) => {
            println!("  meta-features:");
            for name in tscombine_core::meta_features::MetaFeatureVector::all_names() {
                match features.get(name) {
                    Some(v) => println!("    {name}: {v:.6}"),
                    None => println!("    {name}: undefined"),
                }
            }
        }
        Err(e) => println!("  meta-features: unavailable ({e})"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommands_parse() {
        let cli = Cli::try_parse_from(["tscombine", "--config", "c.toml", "run"]).unwrap();
        assert!(matches!(cli.command, Command::Run));
        assert_eq!(cli.config, Some(PathBuf::from("c.toml")));

        let cli =
            Cli::try_parse_from(["tscombine", "report", "per-source", "--config", "c.toml"])
                .unwrap();
        assert!(matches!(
            cli.command,
            Command::Report { kind: ReportKindArg::PerSource }
        ));

        let cli = Cli::try_parse_from([
            "tscombine", "meta", "eval", "--k-max", "12", "--config", "c.toml", "--seed", "9",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(9));
        assert!(matches!(
            cli.command,
            Command::Meta { stage: MetaStage::Eval { k_max: 12 } }
        ));

        let cli = Cli::try_parse_from(["tscombine", "inspect", "s001", "--config", "c.toml"])
            .unwrap();
        assert!(matches!(cli.command, Command::Inspect { dataset_id } if dataset_id == "s001"));
    }

    #[test]
    fn unknown_report_kind_is_rejected() {
        assert!(Cli::try_parse_from(["tscombine", "report", "medals"]).is_err());
    }

    #[test]
    fn missing_config_fails_cleanly() {
        let cli = Cli::try_parse_from(["tscombine", "run"]).unwrap();
        let err = load_config(&cli).unwrap_err().to_string();
        assert!(err.contains("--config"), "{err}");
    }
}
