//! Detector settings and benchmark config files (TOML, or JSON by extension).

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use dlod_core::datasets::{LabelSource, LoadOptions};
use dlod_core::detector::{DataKind, DetectorConfig, KernelChoice, KernelFamily, Method};
use dlod_core::evaluation::{BenchmarkPlan, DatasetEntry, DatasetSource, DetectorEntry};
use dlod_core::signal::Normalization;
use dlod_core::RngSeed;

use crate::CliError;

/// Optional overrides of [`DetectorConfig`] fields; unset fields keep the
/// method defaults.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSettings {
    pub method: Option<Method>,
    /// Column name in reports; defaults to e.g. `SRKDL-S rbf`.
    pub name: Option<String>,
    pub n_atoms: Option<usize>,
    pub sparsity: Option<usize>,
    #[serde(alias = "iterations")]
    pub iters: Option<usize>,
    pub train_perc: Option<f64>,
    #[serde(alias = "train_drop_perc")]
    pub drop_perc: Option<f64>,
    pub base_fraction: Option<f64>,
    pub kernel: Option<KernelFamily>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<u32>,
    pub contamination: Option<f64>,
    pub seed: Option<u64>,
}

impl DetectorSettings {
    /// Fields set in `top` win over `self`.
    pub fn overlay(&self, top: &DetectorSettings) -> DetectorSettings {
        macro_rules! pick {
            ($($f:ident),*) => {
                DetectorSettings { $($f: top.$f.clone().or_else(|| self.$f.clone())),* }
            };
        }
        pick!(
            method,
            name,
            n_atoms,
            sparsity,
            iters,
            train_perc,
            drop_perc,
            base_fraction,
            kernel,
            gamma,
            alpha,
            beta,
            contamination,
            seed
        )
    }

    /// Builds the config; `None` when no method was given.
    pub fn to_config(&self) -> Option<DetectorConfig> {
        let mut cfg = DetectorConfig::new(self.method?);
        if let Some(family) = self.kernel {
            cfg.kernel = KernelChoice::new(family);
        }
        let k = &mut cfg.kernel;
        k.gamma = self.gamma.or(k.gamma);
        k.alpha = self.alpha.unwrap_or(k.alpha);
        k.beta = self.beta.unwrap_or(k.beta);
        cfg.n_atoms = self.n_atoms.unwrap_or(cfg.n_atoms);
        cfg.sparsity = self.sparsity.unwrap_or(cfg.sparsity);
        cfg.iterations = self.iters.unwrap_or(cfg.iterations);
        cfg.train_perc = self.train_perc.unwrap_or(cfg.train_perc);
        cfg.train_drop_perc = self.drop_perc.unwrap_or(cfg.train_drop_perc);
        cfg.base_fraction = self.base_fraction.unwrap_or(cfg.base_fraction);
        cfg.contamination = self.contamination.unwrap_or(cfg.contamination);
        cfg.seed = RngSeed(self.seed.unwrap_or(cfg.seed.0));
        Some(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Sparse,
    Gauss,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    #[default]
    Last,
    First,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: Option<String>,
    pub kind: DatasetKind,
    /// Generator seed of the synthetic kinds.
    pub seed: Option<u64>,
    /// CSV path, relative to the config file.
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub labels: LabelColumn,
    pub label_file: Option<PathBuf>,
    pub header: Option<bool>,
    #[serde(default)]
    pub normalize: Normalization,
    pub data_kind: Option<DataKind>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Output directory, relative to the config file.
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub record_timing: bool,
    /// Applied to every detector before its own settings.
    #[serde(default)]
    pub defaults: DetectorSettings,
    pub datasets: Vec<DatasetSpec>,
    pub detectors: Vec<DetectorSettings>,
}

fn default_rounds() -> usize {
    10
}

fn default_train_fraction() -> f64 {
    0.6
}

fn config_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Reads a TOML file (JSON when the extension is `.json`), reporting the
/// field path of any type error.
pub fn read_config<C: DeserializeOwned>(path: &Path) -> Result<C, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(path, e.to_string()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| field_error(path, e.path().to_string(), e.inner()))
    } else {
        let de = toml::Deserializer::parse(&text).map_err(|e| config_error(path, e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| field_error(path, e.path().to_string(), e.inner()))
    }
}

fn field_error(path: &Path, field: String, inner: &dyn std::fmt::Display) -> CliError {
    let message = inner.to_string();
    let message = message.trim();
    if field == "." {
        config_error(path, message)
    } else {
        config_error(path, format!("{field}: {message}"))
    }
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_config(path)
    }

    /// Resolves relative paths against `base_dir` and checks every entry.
    pub fn to_plan(&self, path: &Path, base_dir: &Path) -> Result<BenchmarkPlan, CliError> {
        if self.rounds == 0 {
            return Err(config_error(path, "rounds: must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(config_error(path, "train_fraction: must be in (0, 1)"));
        }
        if self.datasets.is_empty() || self.detectors.is_empty() {
            return Err(config_error(path, "need at least one dataset and one detector"));
        }
        let mut datasets: Vec<DatasetEntry> = Vec::new();
        for (i, d) in self.datasets.iter().enumerate() {
            let source = match d.kind {
                DatasetKind::Sparse => DatasetSource::Sparse {
                    seed: RngSeed(d.seed.unwrap_or(0)),
                },
                DatasetKind::Gauss => DatasetSource::Gauss {
                    seed: RngSeed(d.seed.unwrap_or(0)),
                },
                DatasetKind::Csv => {
                    let Some(p) = &d.path else {
                        return Err(config_error(path, format!("datasets[{i}].path: required for csv datasets")));
                    };
                    let labels = match (&d.label_file, d.labels) {
                        (Some(f), _) => LabelSource::File(base_dir.join(f)),
                        (None, LabelColumn::Last) => LabelSource::Last,
                        (None, LabelColumn::First) => LabelSource::First,
                    };
                    DatasetSource::Csv {
                        path: base_dir.join(p),
                        options: LoadOptions {
                            labels,
                            header: d.header,
                        },
                    }
                }
            };
            let name = match (&d.name, &source) {
                (Some(n), _) => n.clone(),
                (None, DatasetSource::Csv { path, .. }) => path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("dataset{i}")),
                (None, _) => format!("{:?}", d.kind).to_lowercase(),
            };
            if datasets.iter().any(|e| e.name == name) {
                return Err(config_error(path, format!("datasets[{i}].name: duplicate name `{name}`")));
            }
            datasets.push(DatasetEntry {
                name,
                source,
                normalization: d.normalize,
                data_kind: d.data_kind,
            });
        }
        let mut detectors: Vec<DetectorEntry> = Vec::new();
        for (i, s) in self.detectors.iter().enumerate() {
            let merged = self.defaults.overlay(s);
            let cfg = merged
                .to_config()
                .ok_or_else(|| config_error(path, format!("detectors[{i}].method: missing")))?;
            cfg.validate()
                .map_err(|e| config_error(path, format!("detectors[{i}]: {e}")))?;
            let name = merged.name.clone().unwrap_or_else(|| cfg.name());
            if detectors.iter().any(|e| e.name == name) {
                return Err(config_error(path, format!("detectors[{i}].name: duplicate name `{name}`")));
            }
            detectors.push(DetectorEntry { name, config: cfg });
        }
        Ok(BenchmarkPlan {
            train_fraction: self.train_fraction,
            record_timing: self.record_timing,
            ..BenchmarkPlan::new(datasets, detectors, self.rounds, RngSeed(self.seed))
        })
    }
}
