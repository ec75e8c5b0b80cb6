//! The `dlod` command-line tool: synthetic data, training, scoring and
//! benchmarks over the `dlod-core` detectors.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use dlod_core::datasets::{
    gen_gauss_synthetic, gen_sparse_synthetic, load_labeled_matrix, load_signal_matrix, write_labeled_csv,
    LabelSource, LoadOptions,
};
use dlod_core::detector::{fit, DataKind, KernelFamily, Method};
use dlod_core::evaluation::run_benchmark;
use dlod_core::signal::{Normalization, Preprocessor};
use dlod_core::{DetectorModel64, RngSeed};

use crate::config::{read_config, BenchConfig, DetectorSettings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Core(#[from] dlod_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} benchmark round(s) failed")]
    BenchFailures { failed: usize },
}

impl CliError {
    /// 2 for usage and config errors, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            _ => 1,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dlod", version, about = "Dictionary-learning outlier detection")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV (label last).
    Synth(SynthArgs),
    /// Fit a detector on every row of a CSV file and save the model.
    Train(TrainArgs),
    /// Score the rows of a CSV file with a saved model.
    Score(ScoreArgs),
    /// Run a benchmark described by a config file.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Sparse,
    Gauss,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Rbf,
    Poly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    Unit,
    Standardize,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DataKindArg {
    Synthetic,
    Real,
}

#[derive(Debug, Default, Args)]
pub struct CsvArgs {
    /// The label is the first column instead of the last.
    #[arg(long)]
    pub label_first: bool,
    /// Labels come from this file, one per line; every data column is a feature.
    #[arg(long, conflicts_with = "label_first")]
    pub label_file: Option<PathBuf>,
    /// The first row is a header (detected when neither flag is given).
    #[arg(long)]
    pub header: bool,
    #[arg(long, conflicts_with = "header")]
    pub no_header: bool,
}

impl CsvArgs {
    fn header(&self) -> Option<bool> {
        match (self.header, self.no_header) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }

    fn load_options(&self) -> LoadOptions {
        let labels = match (&self.label_file, self.label_first) {
            (Some(f), _) => LabelSource::File(f.clone()),
            (None, true) => LabelSource::First,
            (None, false) => LabelSource::Last,
        };
        LoadOptions {
            labels,
            header: self.header(),
        }
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|_| {
        let known: Vec<&str> = Method::ALL.iter().map(|m| m.tag()).collect();
        format!("unknown method `{s}` (expected one of {})", known.join(", "))
    })
}

/// Detector parameters; each overrides the config file and method defaults.
#[derive(Debug, Default, Args)]
pub struct DetectorFlags {
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Polynomial kernel offset.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Polynomial kernel degree.
    #[arg(long)]
    pub beta: Option<u32>,
    #[arg(long)]
    pub n_atoms: Option<usize>,
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub train_perc: Option<f64>,
    #[arg(long)]
    pub drop_perc: Option<f64>,
    #[arg(long)]
    pub base_fraction: Option<f64>,
    #[arg(long)]
    pub contamination: Option<f64>,
}

impl DetectorFlags {
    fn settings(&self) -> DetectorSettings {
        DetectorSettings {
            method: self.method,
            name: None,
            n_atoms: self.n_atoms,
            sparsity: self.sparsity,
            iters: self.iters,
            train_perc: self.train_perc,
            drop_perc: self.drop_perc,
            base_fraction: self.base_fraction,
            kernel: self.kernel.map(|k| match k {
                KernelArg::Rbf => KernelFamily::Rbf,
                KernelArg::Poly => KernelFamily::Poly,
            }),
            gamma: self.gamma,
            alpha: self.alpha,
            beta: self.beta,
            contamination: self.contamination,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled CSV; labels are ignored for fitting.
    pub data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Detector settings file (TOML, or JSON by extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorFlags,
    #[arg(long, value_enum, default_value = "unit")]
    pub normalize: NormalizeArg,
    /// Selects the default kernel width.
    #[arg(long, value_enum, default_value = "real")]
    pub data_kind: DataKindArg,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// CSV to score.
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append the predicted label (1 = outlier) to each line.
    #[arg(long)]
    pub predict: bool,
    /// The file has no label column.
    #[arg(long, conflicts_with_all = ["label_first", "label_file"])]
    pub unlabeled: bool,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the config value, then all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Bench(a) => cmd_bench(&a).map(|_| ()),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let seed = RngSeed(args.seed);
    let ds = match args.kind {
        SynthKind::Sparse => gen_sparse_synthetic::<f64>(seed),
        SynthKind::Gauss => gen_gauss_synthetic::<f64>(seed),
    };
    write_labeled_csv(&ds, &args.out)?;
    log::info!("wrote {} signals of dimension {} to {}", ds.len(), ds.dim(), args.out.display());
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let file_settings: DetectorSettings = match &args.config {
        Some(p) => read_config(p)?,
        None => DetectorSettings::default(),
    };
    let settings = file_settings.overlay(&args.detector.settings());
    let mut cfg = settings
        .to_config()
        .ok_or_else(|| CliError::Usage("a method is required (--method or `method` in the config)".into()))?;
    cfg.data_kind = match args.data_kind {
        DataKindArg::Synthetic => DataKind::Synthetic,
        DataKindArg::Real => DataKind::Real,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let ds = load_labeled_matrix::<f64>(&args.data, &args.csv.load_options())?;
    let normalization = match args.normalize {
        NormalizeArg::Unit => Normalization::Unit,
        NormalizeArg::Standardize => Normalization::Standardize,
        NormalizeArg::None => Normalization::None,
    };
    let pre = Preprocessor::fit(normalization, &ds.signals);
    let train = pre.apply(&ds.signals)?;
    let model = fit(&train, &cfg)?.with_preprocessor(pre);
    model.save(&args.out)?;
    log::info!(
        "trained {} on {} signals, threshold {:.6e}, model written to {}",
        cfg.name(),
        train.len(),
        model.threshold(),
        args.out.display()
    );
    Ok(())
}

/// One line per signal: the score with 17 significant digits, optionally
/// followed by `,label`.
pub fn format_scores(scores: &[f64], labels: Option<&[u8]>) -> String {
    let mut out = String::with_capacity(scores.len() * 26);
    for (i, s) in scores.iter().enumerate() {
        out.push_str(&format!("{s:.16e}"));
        if let Some(l) = labels {
            out.push_str(&format!(",{}", l[i]));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    let model = DetectorModel64::load(&args.model)?;
    let signals = if args.unlabeled {
        load_signal_matrix::<f64>(&args.data, args.csv.header())?
    } else {
        load_labeled_matrix::<f64>(&args.data, &args.csv.load_options())?.signals
    };
    let scores = model.score_raw(&signals)?;
    let labels = args.predict.then(|| model.labels_for(&scores));
    let text = format_scores(&scores, labels.as_deref());
    match &args.out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e))?,
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
    }
    Ok(())
}

/// Paths of the written report files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchOutput {
    pub json: PathBuf,
    pub text: PathBuf,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchOutput, CliError> {
    let cfg = BenchConfig::load(&args.config)?;
    let base_dir = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut plan = cfg.to_plan(&args.config, &base_dir)?;
    if let Some(seed) = args.seed {
        plan.master_seed = RngSeed(seed);
    }
    let out_dir = match (&args.out, &cfg.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base_dir.join(o),
        (None, None) => PathBuf::from("bench-out"),
    };
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    let report = pool.install(|| run_benchmark::<f64>(&plan));

    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let out = BenchOutput {
        json: out_dir.join("report.json"),
        text: out_dir.join("report.txt"),
    };
    let tables = report.render_tables();
    fs::write(&out.json, report.to_json() + "\n").map_err(|e| CliError::io(&out.json, e))?;
    fs::write(&out.text, &tables).map_err(|e| CliError::io(&out.text, e))?;
    print!("{tables}");
    match report.n_failures() {
        0 => Ok(out),
        failed => Err(CliError::BenchFailures { failed }),
    }
}
