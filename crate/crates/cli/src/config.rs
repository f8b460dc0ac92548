//! Declarative run configuration.
//!
//! A run is fully described by one TOML file: corpus paths, the train/test
//! split, the base-model pool, the ensemble+HP grid, a seed, the
//! parallelism degree and the output directory. The effective config is
//! re-serialized in canonical form next to the results so a run can be
//! reproduced from its own output directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tscombine_core::ensembles::SuperboosterBase;
use tscombine_core::series::SplitSpec;
use tscombine_core::{EnsembleMethod, EnsembleSpec, ModelName, SelectionStrategy};

use crate::error::{HarnessError, Result};

/// How the test window is carved off each series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitConfig {
    /// Fixed number of test points.
    Horizon(usize),
    /// Fraction of each series kept for training.
    TrainFraction(f64),
}

impl SplitConfig {
    pub fn to_spec(self) -> SplitSpec {
        match self {
            SplitConfig::Horizon(h) => SplitSpec::Horizon(h),
            SplitConfig::TrainFraction(f) => SplitSpec::TrainFraction(f),
        }
    }
}

/// One experiment run, validated before any work starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Series files, manifest files, or directories of series files.
    pub corpus: Vec<PathBuf>,
    pub split: SplitConfig,
    #[serde(default = "default_pool")]
    pub pool: Vec<ModelName>,
    #[serde(default = "default_grid")]
    pub grid: Vec<EnsembleSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Optional holiday calendar (ISO dates, one per line) for calendar features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holidays: Option<PathBuf>,
}

fn default_jobs() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// The full base-model roster.
pub fn default_pool() -> Vec<ModelName> {
    ModelName::ALL.to_vec()
}

/// The stock ensemble+HP grid: every method, a few hyperparameter settings
/// each, in canonical spelling.
pub fn default_grid() -> Vec<EnsembleSpec> {
    const SPECS: [&str; 32] = [
        "detwe(formula=sqr)@all",
        "detwe(formula=inv)@all",
        "detwe(formula=exp)@all",
        "detwe(formula=inv)@best3",
        "mean@all",
        "mean@best3",
        "algo_algo(combo=ets+theta)@all",
        "algo_algo(combo=ets+theta+stlmar)@all",
        "algo_algo(combo=ets+theta+snaive)@all",
        "model_selection(max_iter=20;sort=false)@all",
        "model_selection(max_iter=20;sort=true)@all",
        "selection_bags(metric=mse)@all",
        "selection_bags(metric=mae)@all",
        "backward_elim(combination=weighted_average)@all",
        "backward_elim(combination=stacking;meta=linreg)@all",
        "backward_elim(combination=stacking;meta=rf)@all",
        "stacking(folds=5;meta=linreg)@all",
        "stacking(folds=5;meta=rf)@all",
        "stacking(folds=5;meta=gbt)@all",
        "stacking(folds=5;meta=linreg)@best3",
        "stacking_basic(meta=linreg)@all",
        "stacking_basic(meta=rf)@all",
        "stacking_basic(meta=gbt)@all",
        "recent(lambda=30;p=20)@all",
        "recent(lambda=60;p=20)@all",
        "recent(lambda=30;p=50)@all",
        "recent(lambda=60;p=50)@all",
        "superbooster(base=best;meta=linreg;noise=false)@all",
        "superbooster(base=best;meta=linreg;noise=true)@all",
        "superbooster(base=naive;meta=linreg;noise=false)@all",
        "superbooster(base=naive;meta=rf;noise=true)@all",
        "fforma@all",
    ];
    SPECS.iter().map(|s| s.parse().expect("stock grid spec parses")).collect()
}

impl RunConfig {
    /// Parses and validates a TOML config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("`{}`: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every invariant that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.corpus.is_empty() {
            return bad("corpus: at least one path is required".into());
        }
        match self.split {
            SplitConfig::Horizon(0) => return bad("split: horizon must be ≥ 1".into()),
            SplitConfig::TrainFraction(f) if !(f > 0.0 && f < 1.0) => {
                return bad(format!("split: train_fraction {f} outside (0, 1)"));
            }
            _ => {}
        }
        if self.pool.is_empty() {
            return bad("pool: at least one base model is required".into());
        }
        let pool: BTreeSet<ModelName> = self.pool.iter().copied().collect();
        if pool.len() != self.pool.len() {
            return bad("pool: duplicate base model".into());
        }
        if self.grid.is_empty() {
            return bad("grid: at least one ensemble spec is required".into());
        }
        let mut seen = BTreeSet::new();
        for spec in &self.grid {
            let id = spec.to_string();
            if !seen.insert(id.clone()) {
                return bad(format!("grid: duplicate spec `{id}`"));
            }
            self.check_spec_members(spec)?;
        }
        if self.jobs == 0 {
            return bad("jobs: must be ≥ 1".into());
        }
        Ok(())
    }

    /// Every model a spec names must be in the configured pool, and fforma
    /// needs the whole pool (its weight model is trained over it).
    fn check_spec_members(&self, spec: &EnsembleSpec) -> Result<()> {
        let id = spec.to_string();
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let require = |m: ModelName| -> Result<()> {
            if self.pool.contains(&m) {
                Ok(())
            } else {
                Err(HarnessError::Config(format!("grid: `{id}` names `{m}`, not in the pool")))
            }
        };
        if let SelectionStrategy::Named(names) = &spec.selection {
            for &m in names {
                require(m)?;
            }
        }
        match &spec.method {
            EnsembleMethod::AlgoAlgo { combo } => {
                for &m in combo {
                    require(m)?;
                }
            }
            EnsembleMethod::Superbooster { base: SuperboosterBase::Named(m), .. } => require(*m)?,
            EnsembleMethod::Fforma if spec.selection != SelectionStrategy::All => {
                return bad(format!("grid: `{id}` must use the `all` selection"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Canonical TOML: fixed field order, specs in canonical spelling.
    pub fn canonical_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Base-model names followed by grid spec ids: every algorithm one run
    /// evaluates, in report order.
    pub fn algorithm_ids(&self) -> Vec<String> {
        self.pool
            .iter()
            .map(|m| m.to_string())
            .chain(self.grid.iter().map(|s| s.to_string()))
            .collect()
    }
}
