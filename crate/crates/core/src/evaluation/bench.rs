use std::path::PathBuf;
use std::time::Instant;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{precision_at_n, roc_auc};
use super::report::{BenchmarkReport, CellReport, DatasetReport, RoundFailure};
use crate::datasets::{gen_gauss_synthetic, gen_sparse_synthetic, load_labeled_matrix, split_train_test_with, LabeledDataset, LoadOptions};
use crate::detector::{fit_with_base, DataKind, DetectorConfig};
use crate::dl::{train_dl, DlConfig};
use crate::error::Result;
use crate::kernel::BaseKind;
use crate::rng::RngSeed;
use crate::scalar::Real;
use crate::signal::{Dictionary, Normalization};

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Sparse { seed: RngSeed },
    Gauss { seed: RngSeed },
    Csv { path: PathBuf, options: LoadOptions },
}

impl DatasetSource {
    pub fn data_kind(&self) -> DataKind {
        match self {
            DatasetSource::Csv { .. } => DataKind::Real,
            _ => DataKind::Synthetic,
        }
    }

    pub fn load<T: Real>(&self) -> Result<LabeledDataset<T>> {
        match self {
            DatasetSource::Sparse { seed } => Ok(gen_sparse_synthetic(*seed)),
            DatasetSource::Gauss { seed } => Ok(gen_gauss_synthetic(*seed)),
            DatasetSource::Csv { path, options } => load_labeled_matrix(path, options),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEntry {
    pub name: String,
    pub source: DatasetSource,
    pub normalization: Normalization,
    /// Overrides the kind implied by the source (gamma defaults).
    pub data_kind: Option<DataKind>,
}

impl DatasetEntry {
    pub fn new(name: impl Into<String>, source: DatasetSource) -> Self {
        DatasetEntry {
            name: name.into(),
            source,
            normalization: Normalization::Unit,
            data_kind: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectorEntry {
    pub name: String,
    pub config: DetectorConfig,
}

impl DetectorEntry {
    pub fn new(config: DetectorConfig) -> Self {
        DetectorEntry {
            name: config.name(),
            config,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkPlan {
    pub datasets: Vec<DatasetEntry>,
    pub detectors: Vec<DetectorEntry>,
    pub rounds: usize,
    pub master_seed: RngSeed,
    pub train_fraction: f64,
    /// Wall-clock timings make the report nondeterministic, so they are opt-in.
    pub record_timing: bool,
}

impl BenchmarkPlan {
    pub fn new(datasets: Vec<DatasetEntry>, detectors: Vec<DetectorEntry>, rounds: usize, master_seed: RngSeed) -> Self {
        BenchmarkPlan {
            datasets,
            detectors,
            rounds,
            master_seed,
            train_fraction: 0.6,
            record_timing: false,
        }
    }
}

#[derive(Clone)]
struct RoundOutcome {
    roc: f64,
    prn: f64,
    seconds: f64,
}

type RoundResults = Vec<std::result::Result<RoundOutcome, String>>;

/// Runs every detector on every dataset for `plan.rounds` random splits.
///
/// All detectors see the same split in a given round. Within a round the
/// trained-dictionary kernel variants share one linear base dictionary per
/// distinct base configuration. Failures are recorded per round.
pub fn run_benchmark<T: Real>(plan: &BenchmarkPlan) -> BenchmarkReport {
    let rounds = plan.rounds.max(1);
    let loaded: Vec<std::result::Result<LabeledDataset<T>, String>> = plan
        .datasets
        .par_iter()
        .map(|d| d.source.load::<T>().map_err(|e| e.to_string()))
        .collect();

    let tasks: Vec<(usize, usize)> = (0..plan.datasets.len())
        .flat_map(|d| (0..rounds).map(move |r| (d, r)))
        .collect();
    let results: Vec<RoundResults> = tasks
        .par_iter()
        .map(|&(d, r)| match &loaded[d] {
            Ok(ds) => run_round(plan, &plan.datasets[d], ds, r),
            Err(e) => vec![Err(e.clone()); plan.detectors.len()],
        })
        .collect();

    let mut datasets = IndexMap::new();
    for (d, entry) in plan.datasets.iter().enumerate() {
        let data_kind = entry.data_kind.unwrap_or(entry.source.data_kind());
        let mut detectors = IndexMap::new();
        for (k, det) in plan.detectors.iter().enumerate() {
            let (mut roc, mut prn, mut secs, mut failures) = (vec![], vec![], vec![], vec![]);
            for r in 0..rounds {
                match &results[d * rounds + r][k] {
                    Ok(o) => {
                        roc.push(o.roc);
                        prn.push(o.prn);
                        secs.push(o.seconds);
                    }
                    Err(message) => failures.push(RoundFailure {
                        round: r,
                        message: message.clone(),
                    }),
                }
            }
            let seconds = (plan.record_timing && !secs.is_empty()).then(|| secs.iter().sum::<f64>() / secs.len() as f64);
            let config = DetectorConfig {
                data_kind,
                ..det.config.clone()
            };
            detectors.insert(det.name.clone(), CellReport::from_rounds(config, roc, prn, seconds, failures));
        }
        let (samples, dim, outlier_percent, error) = match &loaded[d] {
            Ok(ds) => (ds.len(), ds.dim(), 100.0 * ds.n_outliers() as f64 / ds.len() as f64, None),
            Err(e) => (0, 0, 0.0, Some(e.clone())),
        };
        datasets.insert(
            entry.name.clone(),
            DatasetReport {
                samples,
                dim,
                outlier_percent,
                error,
                detectors,
            },
        );
    }
    BenchmarkReport {
        rounds,
        master_seed: plan.master_seed.0,
        train_fraction: plan.train_fraction,
        datasets,
    }
}

fn run_round<T: Real>(plan: &BenchmarkPlan, entry: &DatasetEntry, ds: &LabeledDataset<T>, round: usize) -> RoundResults {
    let round_seed = plan.master_seed.derive(&format!("bench/{}", entry.name), round as u64);
    let split = match split_train_test_with(ds, plan.train_fraction, round_seed, entry.normalization) {
        Ok(s) => s,
        Err(e) => return vec![Err(e.to_string()); plan.detectors.len()],
    };
    let data_kind = entry.data_kind.unwrap_or(entry.source.data_kind());
    let fit_seed = round_seed.derive("fit", 0);
    let configs: Vec<DetectorConfig> = plan
        .detectors
        .iter()
        .map(|d| DetectorConfig {
            data_kind,
            seed: fit_seed.derive("detector", d.config.seed.0),
            ..d.config.clone()
        })
        .collect();

    let mut base_cfgs: Vec<DlConfig> = Vec::new();
    for cfg in &configs {
        if cfg.method.base_kind() == Some(BaseKind::TrainedDict) {
            let b = DlConfig {
                seed: round_seed.derive("base-dictionary", 0),
                ..cfg.base_dictionary_config(split.train.len())
            };
            if !base_cfgs.contains(&b) {
                base_cfgs.push(b);
            }
        }
    }
    let bases: Vec<std::result::Result<Dictionary<T>, String>> = base_cfgs
        .par_iter()
        .map(|b| train_dl(&split.train, b).map_err(|e| e.to_string()))
        .collect();

    configs
        .par_iter()
        .map(|cfg| {
            let start = Instant::now();
            let base = if cfg.method.base_kind() == Some(BaseKind::TrainedDict) {
                let key = DlConfig {
                    seed: round_seed.derive("base-dictionary", 0),
                    ..cfg.base_dictionary_config(split.train.len())
                };
                let i = base_cfgs.iter().position(|b| *b == key).expect("base config registered");
                match &bases[i] {
                    Ok(d) => Some(d),
                    Err(e) => return Err(format!("base dictionary: {e}")),
                }
            } else {
                None
            };
            let model = fit_with_base(&split.train, cfg, base).map_err(|e| e.to_string())?;
            let seconds = start.elapsed().as_secs_f64();
            let scores: Vec<f64> = model
                .decision_scores(&split.test.signals)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(Real::as_f64)
                .collect();
            let roc = roc_auc(&scores, &split.test.labels).map_err(|e| e.to_string())?;
            let prn = precision_at_n(&scores, &split.test.labels).map_err(|e| e.to_string())?;
            log::info!(
                "{} / {} / round {round}: roc {roc:.4} prn {prn:.4}",
                entry.name,
                cfg.name()
            );
            Ok(RoundOutcome { roc, prn, seconds })
        })
        .collect()
}
