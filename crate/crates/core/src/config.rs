//! Declarative configuration: dataset specs, search configs, experiment
//! plans (TOML), and `EVOFORGE_`-prefixed environment overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, prepare_split, synth_series, CsvSchema, SynthKind, TrainValSplit};
use crate::error::{Error, Result};
use crate::islands::{Budget, IslandConfig, SearchSettings};
use crate::rnn::train::TrainConfig;
use crate::variation::VariationConfig;
use crate::weights::{SamplerConfig, WeightStrategyTriple};

/// Where the series comes from and how it is split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// "synth" or "csv".
    pub source: String,
    /// Synthetic kind: sine_mix, mackey_glass, noisy_ar.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default = "default_length")]
    pub length: usize,
    /// Seed of the synthetic generator (independent of the search seed).
    #[serde(default)]
    pub seed: u64,
    /// CSV path plus column selection.
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub input_columns: Vec<String>,
    #[serde(default)]
    pub output_columns: Vec<String>,
    #[serde(default)]
    pub allow_overlap: bool,
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    #[serde(default)]
    pub drop_constant_columns: bool,
}

fn default_length() -> usize {
    2000
}

fn default_split_fraction() -> f64 {
    2.0 / 3.0
}

impl DatasetConfig {
    pub fn synth(kind: &str, length: usize, seed: u64) -> DatasetConfig {
        DatasetConfig {
            source: "synth".to_string(),
            kind: Some(kind.to_string()),
            length,
            seed,
            path: None,
            input_columns: Vec::new(),
            output_columns: Vec::new(),
            allow_overlap: false,
            split_fraction: default_split_fraction(),
            drop_constant_columns: false,
        }
    }

    /// Load, normalize and split the configured series.
    pub fn load(&self) -> Result<TrainValSplit> {
        let ts = match self.source.as_str() {
            "synth" => {
                let kind = self.kind.as_deref().ok_or_else(|| {
                    Error::Config("dataset.kind is required when source = \"synth\"".to_string())
                })?;
                synth_series(SynthKind::parse(kind)?, self.length, self.seed)?
            }
            "csv" => {
                let path = self.path.as_deref().ok_or_else(|| {
                    Error::Config("dataset.path is required when source = \"csv\"".to_string())
                })?;
                if self.input_columns.is_empty() || self.output_columns.is_empty() {
                    return Err(Error::Config(
                        "dataset.input_columns and dataset.output_columns are required for CSV data"
                            .to_string(),
                    ));
                }
                load_csv(
                    Path::new(path),
                    &CsvSchema {
                        input_columns: self.input_columns.clone(),
                        output_columns: self.output_columns.clone(),
                        allow_overlap: self.allow_overlap,
                    },
                )?
            }
            other => {
                return Err(Error::Config(format!(
                    "dataset.source must be \"synth\" or \"csv\", got {other:?}"
                )))
            }
        };
        prepare_split(&ts, self.split_fraction, self.drop_constant_columns)
    }
}

/// The `[search]` section of a search config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSection {
    pub strategy: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_seed() -> u64 {
    0
}
fn default_workers() -> usize {
    1
}

/// A full `search` command configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub dataset: DatasetConfig,
    pub search: SearchSection,
    pub budget: Budget,
    #[serde(default)]
    pub islands: IslandConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub variation: VariationConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

impl SearchSpec {
    pub fn settings(&self) -> Result<SearchSettings> {
        Ok(SearchSettings {
            strategy: WeightStrategyTriple::parse(&self.search.strategy)?,
            islands: self.islands.clone(),
            budget: self.budget,
            sampler: self.sampler.clone(),
            variation: self.variation.clone(),
            train: self.train.clone(),
            workers: self.search.workers,
        })
    }
}

/// The `[plan]` section of an experiment plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSection {
    pub strategies: Vec<String>,
    pub budgets: Vec<usize>,
    #[serde(default = "default_total_epoch_budget")]
    pub total_epoch_budget: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Run independent cells concurrently (each search single-worker).
    #[serde(default)]
    pub parallel_cells: bool,
}

fn default_total_epoch_budget() -> usize {
    2000
}
fn default_repeats() -> usize {
    10
}

/// A full experiment plan: the strategy-combination by epoch-budget matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: DatasetConfig,
    pub plan: PlanSection,
    #[serde(default)]
    pub islands: IslandConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub variation: VariationConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.plan.strategies.is_empty() || self.plan.budgets.is_empty() {
            return Err(Error::Config(
                "plan.strategies and plan.budgets must be non-empty".to_string(),
            ));
        }
        if self.plan.repeats == 0 {
            return Err(Error::Config("plan.repeats must be >= 1".to_string()));
        }
        for code in &self.plan.strategies {
            WeightStrategyTriple::parse(code)?;
        }
        for &b in &self.plan.budgets {
            Budget {
                bp_epochs_per_genome: b,
                total_bp_epochs: self.plan.total_epoch_budget,
            }
            .validate()?;
        }
        Ok(())
    }
}

/// Apply `EVOFORGE_<SECTION>_<KEY>=value` overrides onto a parsed TOML tree:
/// the first underscore-separated segment names the table, the rest the key,
/// e.g. `EVOFORGE_TRAIN_LEARNING_RATE=0.01` sets `train.learning_rate`.
pub fn apply_env_overrides<I>(doc: &mut toml::Table, vars: I)
where
    I: Iterator<Item = (String, String)>,
{
    const PREFIX: &str = "EVOFORGE_";
    for (name, raw) in vars {
        let Some(rest) = name.strip_prefix(PREFIX) else {
            continue;
        };
        let Some((section, key)) = rest.split_once('_') else {
            continue;
        };
        let section = section.to_ascii_lowercase();
        let key = key.to_ascii_lowercase();
        let value = parse_scalar(&raw);
        let table = doc
            .entry(section)
            .or_insert_with(|| toml::Value::Table(Default::default()));
        if let Some(t) = table.as_table_mut() {
            t.insert(key, value);
        }
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(v) = raw.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        return toml::Value::Float(v);
    }
    match raw {
        "true" => return toml::Value::Boolean(true),
        "false" => return toml::Value::Boolean(false),
        _ => {}
    }
    toml::Value::String(raw.to_string())
}

/// Read a TOML config file, apply environment overrides, and deserialize.
pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    apply_env_overrides(&mut doc, std::env::vars());
    toml::Value::Table(doc)
        .try_into()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
