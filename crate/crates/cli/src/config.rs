//! Experiment configuration: a TOML document with nested sections, every
//! key overridable from the command line with `--set section.key=value`.

use std::fs;
use std::path::{Path, PathBuf};

use ppinf_core::forecast::ForecastConfig;
use ppinf_core::learner::TrainConfig;
use ppinf_core::propagation::{Head, PropagationConfig};
use ppinf_core::sampler::synthetic::SyntheticConfig;
use ppinf_core::sampler::DatasetConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Input file locations. Relative paths resolve against the working directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Tab-separated edge list.
    pub graph: Option<PathBuf>,
    /// Active node ids at observation time, one per line.
    pub activation_t: Option<PathBuf>,
    /// Active node ids at the label time.
    pub activation_next: Option<PathBuf>,
    /// Precomputed embeddings, `id<TAB>v1<TAB>...`.
    pub embeddings: Option<PathBuf>,
    /// JSON-lines instance set.
    pub instances: Option<PathBuf>,
    /// Region series CSV `date,region_id,cumulative_cases`.
    pub series: Option<PathBuf>,
    /// Region interaction edge list; a complete graph when absent.
    pub series_edges: Option<PathBuf>,
}

/// Which node feature blocks to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSelection {
    /// The eight structural vertex scores.
    pub vertex: bool,
    /// Width of a DeepWalk embedding computed in-process; 0 disables.
    pub deepwalk_dim: usize,
    /// Append the embeddings file from `data.embeddings` when set.
    pub use_embeddings_file: bool,
}

impl Default for FeatureSelection {
    fn default() -> Self {
        FeatureSelection {
            vertex: true,
            deepwalk_dim: 0,
            use_embeddings_file: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub heads: Vec<Head>,
    pub alphas: Vec<f64>,
    pub k_values: Vec<usize>,
    /// Cells trained concurrently.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            heads: Head::ALL.to_vec(),
            alphas: vec![0.2, 0.4, 0.6, 0.8],
            k_values: vec![10],
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastSection {
    /// Largest horizon in days; every horizon from 1 up to it is scored.
    pub horizon: usize,
    #[serde(flatten)]
    pub model: ForecastConfig,
}

impl Default for ForecastSection {
    fn default() -> Self {
        ForecastSection {
            horizon: 1,
            model: ForecastConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; the `--seed` flag replaces it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataPaths,
    pub features: FeatureSelection,
    pub sampler: DatasetConfig,
    pub synthetic: SyntheticConfig,
    pub propagation: PropagationConfig,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
    pub forecast: ForecastSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: PathBuf::from("runs"),
            data: DataPaths::default(),
            features: FeatureSelection::default(),
            sampler: DatasetConfig::default(),
            synthetic: SyntheticConfig::default(),
            propagation: PropagationConfig::default(),
            train: TrainConfig::default(),
            sweep: SweepConfig::default(),
            forecast: ForecastSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (or starts from defaults), applies `key=value`
    /// overrides in order, then installs `seed` in every seeded section.
    pub fn resolve(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> CliResult<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::bad_input(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::bad_input(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        check_forecast_keys(&doc)?;
        let mut cfg: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e| CliError::bad_input(format!("config: {e}")))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.train.seed = cfg.seed;
        cfg.sampler.seed = cfg.seed;
        cfg.forecast.model.train.seed = cfg.seed;
        cfg.propagation
            .validate()
            .map_err(|e| CliError::bad_input(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Canonical TOML rendering, used as the config echo.
    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::internal(format!("config echo: {e}")))
    }
}

/// The flattened forecast table cannot deny unknown keys through serde.
fn check_forecast_keys(doc: &toml::Table) -> CliResult<()> {
    let Some(toml::Value::Table(section)) = doc.get("forecast") else {
        return Ok(());
    };
    let known = toml::Table::try_from(ForecastSection::default())
        .map_err(|e| CliError::internal(format!("forecast defaults: {e}")))?;
    match section.keys().find(|k| !known.contains_key(*k)) {
        Some(k) => Err(CliError::bad_input(format!("config: unknown field `{k}` in [forecast]"))),
        None => Ok(()),
    }
}

/// Sets `a.b.c=value`, creating intermediate tables. The value is parsed as
/// a TOML literal and falls back to a bare string.
pub fn apply_override(doc: &mut toml::Table, item: &str) -> CliResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::bad_input(format!("override {item:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::bad_input(format!("override {item:?} has an empty key segment")));
    }
    let value = parse_value(raw.trim());
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::bad_input(format!("override {item:?}: {part} is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for key in ["bogus=1", "train.epochz=3", "sampler.size=3", "propagation.beta=0.1", "forecast.horizonz=2", "forecast.train.lr=1.0"] {
            assert!(ExperimentConfig::resolve(None, &[key.to_string()], Some(1)).is_err(), "{key}");
        }
        let ok = ExperimentConfig::resolve(None, &["forecast.horizon=3".into(), "forecast.threshold=0.05".into()], Some(1)).unwrap();
        assert_eq!((ok.forecast.horizon, ok.forecast.model.threshold), (3, 0.05));
    }

    #[test]
    fn defaults_echo_documented_values() {
        let cfg = ExperimentConfig::resolve(None, &[], Some(5)).unwrap();
        assert_eq!(cfg.train.learning_rate, 0.1);
        assert_eq!(cfg.train.dropout, 0.2);
        assert_eq!(cfg.sweep.alphas, vec![0.2, 0.4, 0.6, 0.8]);
        assert_eq!(cfg.sweep.heads.len(), 5);
        assert_eq!(cfg.train.seed, 5);
        assert_eq!(cfg.sampler.seed, 5);
    }

    #[test]
    fn overrides_reach_nested_sections() {
        let sets = vec![
            "propagation.head=\"APPNP\"".to_string(),
            "propagation.alpha=0.6".to_string(),
            "train.epochs=3".to_string(),
            "data.instances=some/file.jsonl".to_string(),
            "forecast.threshold=0.05".to_string(),
        ];
        let cfg = ExperimentConfig::resolve(None, &sets, None).unwrap();
        assert_eq!(cfg.propagation.head, Head::Appnp);
        assert_eq!(cfg.propagation.alpha, 0.6);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.data.instances, Some(PathBuf::from("some/file.jsonl")));
        assert_eq!(cfg.forecast.model.threshold, 0.05);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::resolve(None, &["sweep.k_values=[5, 10]".into()], Some(9)).unwrap();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::resolve(None, &["bogus=1".into()], None).is_err());
        assert!(ExperimentConfig::resolve(None, &["propagation.alpha=1.5".into()], None).is_err());
        assert!(ExperimentConfig::resolve(None, &["novalue".into()], None).is_err());
    }
}
