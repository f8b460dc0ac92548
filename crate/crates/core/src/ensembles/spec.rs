//! The ensemble+hyperparameter identity: a structured spec with a stable
//! canonical string form, `method(key=value;…)@selection`, used verbatim as
//! the algorithm identifier in results, reports, and meta-learning.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::info;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::selection::{BagMetric, ElimCombination};
use super::{
    DetweFormula, MetaModelKind, RecentConfig, SelectionStrategy, COMBO_REMAPS,
    DEFAULT_MAX_ITER, DEFAULT_N_FOLDS,
};
use crate::base_models::ModelName;
use crate::error::{Error, Result};

/// Which base model the superbooster is trained on top of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuperboosterBase {
    /// The pool member with the lowest training error.
    Best,
    Named(ModelName),
}

impl fmt::Display for SuperboosterBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuperboosterBase::Best => f.write_str("best"),
            SuperboosterBase::Named(name) => f.write_str(name.as_str()),
        }
    }
}

/// One of the eleven combination methods, with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleMethod {
    Detwe { formula: DetweFormula },
    Stacking { meta: MetaModelKind, n_folds: usize },
    StackingBasic { meta: MetaModelKind },
    ModelSelection { sort: bool, max_iter: usize },
    SelectionBags { metric: BagMetric },
    BackwardElim { combination: ElimCombination },
    Fforma,
    Recent(RecentConfig),
    Superbooster { base: SuperboosterBase, noise: bool, meta: MetaModelKind },
    Mean,
    AlgoAlgo { combo: Vec<ModelName> },
}

impl EnsembleMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EnsembleMethod::Detwe { .. } => "detwe",
            EnsembleMethod::Stacking { .. } => "stacking",
            EnsembleMethod::StackingBasic { .. } => "stacking_basic",
            EnsembleMethod::ModelSelection { .. } => "model_selection",
            EnsembleMethod::SelectionBags { .. } => "selection_bags",
            EnsembleMethod::BackwardElim { .. } => "backward_elim",
            EnsembleMethod::Fforma => "fforma",
            EnsembleMethod::Recent(_) => "recent",
            EnsembleMethod::Superbooster { .. } => "superbooster",
            EnsembleMethod::Mean => "mean",
            EnsembleMethod::AlgoAlgo { .. } => "algo_algo",
        }
    }

    /// Hyperparameters in canonical (alphabetical) key order.
    fn params(&self) -> Vec<(&'static str, String)> {
        match self {
            EnsembleMethod::Detwe { formula } => {
                vec![("formula", formula.as_str().into())]
            }
            EnsembleMethod::Stacking { meta, n_folds } => vec![
                ("folds", n_folds.to_string()),
                ("meta", meta.as_str().into()),
            ],
            EnsembleMethod::StackingBasic { meta } => {
                vec![("meta", meta.as_str().into())]
            }
            EnsembleMethod::ModelSelection { sort, max_iter } => vec![
                ("max_iter", max_iter.to_string()),
                ("sort", sort.to_string()),
            ],
            EnsembleMethod::SelectionBags { metric } => {
                vec![("metric", metric.as_str().into())]
            }
            EnsembleMethod::BackwardElim { combination } => match combination {
                ElimCombination::WeightedAverage => {
                    vec![("combination", "weighted_average".into())]
                }
                ElimCombination::Stacking(meta) => vec![
                    ("combination", "stacking".into()),
                    ("meta", meta.as_str().into()),
                ],
            },
            EnsembleMethod::Fforma | EnsembleMethod::Mean => Vec::new(),
            EnsembleMethod::Recent(config) => vec![
                ("lambda", config.lambda_pct.to_string()),
                ("p", config.p.to_string()),
            ],
            EnsembleMethod::Superbooster { base, noise, meta } => vec![
                ("base", base.to_string()),
                ("meta", meta.as_str().into()),
                ("noise", noise.to_string()),
            ],
            EnsembleMethod::AlgoAlgo { combo } => vec![(
                "combo",
                combo.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+"),
            )],
        }
    }
}

/// A fully specified ensemble evaluation: method, hyperparameters, and the
/// pool-selection strategy it runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub method: EnsembleMethod,
    pub selection: SelectionStrategy,
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.method.name())?;
        let params = self.method.params();
        if !params.is_empty() {
            write!(f, "(")?;
            for (i, (k, v)) in params.iter().enumerate() {
                if i > 0 {
                    write!(f, ";")?;
                }
                write!(f, "{k}={v}")?;
            }
            write!(f, ")")?;
        }
        write!(f, "@")?;
        match &self.selection {
            SelectionStrategy::All => write!(f, "all"),
            SelectionStrategy::Best(b) => write!(f, "best{b}"),
            SelectionStrategy::Named(names) => {
                write!(f, "named[")?;
                for (i, n) in names.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl Serialize for EnsembleSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EnsembleSpec {
    fn deserialize<D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<EnsembleSpec, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

fn bad(spec: &str, why: &str) -> Error {
    Error::InvalidArgument(format!("cannot parse ensemble spec `{spec}`: {why}"))
}

fn parse_params(spec: &str, body: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    if body.is_empty() {
        return Ok(map);
    }
    for pair in body.split(';') {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| bad(spec, &format!("`{pair}` is not key=value")))?;
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(bad(spec, &format!("duplicate key `{k}`")));
        }
    }
    Ok(map)
}

fn take_bool(spec: &str, map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<bool>> {
    match map.remove(key) {
        None => Ok(None),
        Some(v) => match v.as_str() {
            "true" => Ok(Some(true)),
            "false" => Ok(Some(false)),
            other => Err(bad(spec, &format!("`{key}` must be true|false, got `{other}`"))),
        },
    }
}

fn take_usize(spec: &str, map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<usize>> {
    match map.remove(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| bad(spec, &format!("`{key}` must be an integer, got `{v}`"))),
    }
}

fn require<T>(spec: &str, key: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| bad(spec, &format!("missing required key `{key}`")))
}

fn parse_meta(spec: &str, v: &str) -> Result<MetaModelKind> {
    match v {
        "linreg" => Ok(MetaModelKind::Linreg),
        "rf" => Ok(MetaModelKind::Rf),
        "gbt" => Ok(MetaModelKind::Gbt),
        other => Err(bad(spec, &format!("`meta` must be linreg|rf|gbt, got `{other}`"))),
    }
}

fn remap_hint() -> String {
    COMBO_REMAPS
        .iter()
        .map(|(from, to)| format!("{from}→{to}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_combo(spec: &str, value: &str) -> Result<Vec<ModelName>> {
    // Whole-combo names from the source material that reference
    // out-of-scope models are remapped to in-scope defaults.
    let effective = match COMBO_REMAPS.iter().find(|(from, _)| *from == value) {
        Some((from, to)) => {
            info!("remapping legacy combo `{from}` to `{to}`");
            to
        }
        None => value,
    };
    let mut combo = Vec::new();
    for token in effective.split('+') {
        let name = token.parse::<ModelName>().map_err(|_| {
            Error::UnknownName(
                token.to_string(),
                format!("combo `{value}` of spec `{spec}` (remaps: {})", remap_hint()),
            )
        })?;
        combo.push(name);
    }
    if combo.is_empty() {
        return Err(bad(spec, "empty combo"));
    }
    Ok(combo)
}

fn parse_selection(spec: &str, s: &str) -> Result<SelectionStrategy> {
    if s == "all" {
        return Ok(SelectionStrategy::All);
    }
    if let Some(rest) = s.strip_prefix("best") {
        let b = if rest.is_empty() {
            SelectionStrategy::DEFAULT_NUM_BEST
        } else {
            rest.parse::<usize>()
                .map_err(|_| bad(spec, &format!("`{s}` is not a best-count")))?
        };
        if b == 0 {
            return Err(bad(spec, "best-count must be ≥ 1"));
        }
        return Ok(SelectionStrategy::Best(b));
    }
    if let Some(inner) = s.strip_prefix("named[").and_then(|r| r.strip_suffix(']')) {
        let mut names = Vec::new();
        for token in inner.split('+') {
            names.push(token.parse::<ModelName>().map_err(|_| {
                Error::UnknownName(token.to_string(), format!("selection of spec `{spec}`"))
            })?);
        }
        if names.is_empty() {
            return Err(bad(spec, "empty named selection"));
        }
        return Ok(SelectionStrategy::Named(names));
    }
    Err(bad(spec, &format!("unknown selection `{s}`")))
}

impl FromStr for EnsembleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<EnsembleSpec> {
        let spec = s.trim();
        let (method_part, selection_part) = spec
            .rsplit_once('@')
            .ok_or_else(|| bad(spec, "missing `@selection` suffix"))?;
        let (name, body) = match method_part.find('(') {
            Some(open) => {
                let close = method_part
                    .strip_suffix(')')
                    .ok_or_else(|| bad(spec, "unclosed parameter list"))?;
                (&method_part[..open], &close[open + 1..])
            }
            None => (method_part, ""),
        };
        let mut params = parse_params(spec, body)?;
        let method = match name {
            "detwe" => {
                let formula = match require(spec, "formula", params.remove("formula"))?.as_str() {
                    "sqr" => DetweFormula::Sqr,
                    "inv" => DetweFormula::Inv,
                    "exp" => DetweFormula::Exp,
                    other => {
                        return Err(bad(
                            spec,
                            &format!("`formula` must be sqr|inv|exp, got `{other}`"),
                        ))
                    }
                };
                EnsembleMethod::Detwe { formula }
            }
            "stacking" => EnsembleMethod::Stacking {
                meta: parse_meta(spec, &require(spec, "meta", params.remove("meta"))?)?,
                n_folds: take_usize(spec, &mut params, "folds")?.unwrap_or(DEFAULT_N_FOLDS),
            },
            "stacking_basic" => EnsembleMethod::StackingBasic {
                meta: parse_meta(spec, &require(spec, "meta", params.remove("meta"))?)?,
            },
            "model_selection" => EnsembleMethod::ModelSelection {
                sort: take_bool(spec, &mut params, "sort")?.unwrap_or(false),
                max_iter: take_usize(spec, &mut params, "max_iter")?
                    .unwrap_or(DEFAULT_MAX_ITER),
            },
            "selection_bags" => {
                let metric = match require(spec, "metric", params.remove("metric"))?.as_str() {
                    "mse" => BagMetric::Mse,
                    "mae" => BagMetric::Mae,
                    other => {
                        return Err(bad(spec, &format!("`metric` must be mse|mae, got `{other}`")))
                    }
                };
                EnsembleMethod::SelectionBags { metric }
            }
            "backward_elim" => {
                let combination =
                    match require(spec, "combination", params.remove("combination"))?.as_str() {
                        "weighted_average" => ElimCombination::WeightedAverage,
                        "stacking" => ElimCombination::Stacking(parse_meta(
                            spec,
                            &require(spec, "meta", params.remove("meta"))?,
                        )?),
                        other => {
                            return Err(bad(
                                spec,
                                &format!(
                                    "`combination` must be weighted_average|stacking, got `{other}`"
                                ),
                            ))
                        }
                    };
                EnsembleMethod::BackwardElim { combination }
            }
            "fforma" => EnsembleMethod::Fforma,
            "recent" => EnsembleMethod::Recent(RecentConfig {
                p: require(spec, "p", take_usize(spec, &mut params, "p")?)?,
                lambda_pct: require(spec, "lambda", take_usize(spec, &mut params, "lambda")?)?,
            }),
            "superbooster" => {
                let base = match require(spec, "base", params.remove("base"))?.as_str() {
                    "best" => SuperboosterBase::Best,
                    other => SuperboosterBase::Named(other.parse::<ModelName>().map_err(
                        |_| bad(spec, &format!("`base` must be best|<model>, got `{other}`")),
                    )?),
                };
                EnsembleMethod::Superbooster {
                    base,
                    noise: require(spec, "noise", take_bool(spec, &mut params, "noise")?)?,
                    meta: parse_meta(spec, &require(spec, "meta", params.remove("meta"))?)?,
                }
            }
            "mean" => EnsembleMethod::Mean,
            "algo_algo" => EnsembleMethod::AlgoAlgo {
                combo: parse_combo(spec, &require(spec, "combo", params.remove("combo"))?)?,
            },
            other => return Err(bad(spec, &format!("unknown method `{other}`"))),
        };
        if let Some(stray) = params.keys().next() {
            return Err(bad(spec, &format!("unknown key `{stray}` for method `{name}`")));
        }
        let selection = parse_selection(spec, selection_part)?;
        Ok(EnsembleSpec { method, selection })
    }
}
