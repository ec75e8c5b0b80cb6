//! Outlier detectors built on the dictionary learning variants.
//!
//! A detector is fitted on unlabeled training signals; the score of a signal
//! is the norm of its sparse representation error (in feature space for the
//! kernel methods). The label threshold is a quantile of the training scores.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dl::{sample_size, train_dl, DlConfig};
use crate::error::{Error, Result};
use crate::kernel::{train_rkdl, BaseKind, KdlConfig, KernelBase, KernelCoder, KernelDictionary, KernelModel, KernelSpec};
use crate::linalg::Mat;
use crate::omp::batch_code_with_residuals;
use crate::rng::RngSeed;
use crate::scalar::Real;
use crate::signal::{Dictionary, Preprocessor, SignalMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dl,
    Sdl,
    RkdlS,
    RkdlD,
    SrkdlS,
    SrkdlD,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dl,
        Method::Sdl,
        Method::RkdlS,
        Method::RkdlD,
        Method::SrkdlS,
        Method::SrkdlD,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Dl => "DL",
            Method::Sdl => "SDL",
            Method::RkdlS => "RKDL-S",
            Method::RkdlD => "RKDL-D",
            Method::SrkdlS => "SRKDL-S",
            Method::SrkdlD => "SRKDL-D",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Method::Dl => "dl",
            Method::Sdl => "sdl",
            Method::RkdlS => "rkdl-s",
            Method::RkdlD => "rkdl-d",
            Method::SrkdlS => "srkdl-s",
            Method::SrkdlD => "srkdl-d",
        }
    }

    pub fn is_kernel(self) -> bool {
        !matches!(self, Method::Dl | Method::Sdl)
    }

    pub fn is_selective(self) -> bool {
        matches!(self, Method::Sdl | Method::SrkdlS | Method::SrkdlD)
    }

    pub fn base_kind(self) -> Option<BaseKind> {
        match self {
            Method::RkdlS | Method::SrkdlS => Some(BaseKind::Sampled),
            Method::RkdlD | Method::SrkdlD => Some(BaseKind::TrainedDict),
            _ => None,
        }
    }

    /// Default `(train_perc, train_drop_perc)`.
    pub fn default_selection(self) -> (f64, f64) {
        match self {
            Method::Sdl => (0.7, 0.4),
            Method::SrkdlS | Method::SrkdlD => (0.8, 0.3),
            _ => (1.0, 0.0),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s) || m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("method", format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Rbf,
    Poly,
}

impl KernelFamily {
    pub fn tag(self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Poly => "poly",
        }
    }
}

/// Where the data comes from; only used to pick default kernel widths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Synthetic,
    #[default]
    Real,
}

/// Kernel family with optional width; unset `gamma` follows the defaults
/// `1/m` on synthetic data, `0.1/m` (rbf) or `10/m` (poly) otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelChoice {
    pub family: KernelFamily,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: u32,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_beta() -> u32 {
    3
}

impl KernelChoice {
    pub fn new(family: KernelFamily) -> Self {
        KernelChoice {
            family,
            gamma: None,
            alpha: default_alpha(),
            beta: default_beta(),
        }
    }

    pub fn gamma_for(&self, dim: usize, data: DataKind) -> f64 {
        self.gamma.unwrap_or_else(|| {
            let m = dim as f64;
            match (data, self.family) {
                (DataKind::Synthetic, _) => 1.0 / m,
                (DataKind::Real, KernelFamily::Rbf) => 0.1 / m,
                (DataKind::Real, KernelFamily::Poly) => 10.0 / m,
            }
        })
    }

    pub fn resolve<T: Real>(&self, dim: usize, data: DataKind) -> KernelSpec<T> {
        let gamma = T::lit(self.gamma_for(dim, data));
        match self.family {
            KernelFamily::Rbf => KernelSpec::rbf(gamma),
            KernelFamily::Poly => KernelSpec::polynomial(gamma, T::lit(self.alpha), self.beta),
        }
    }
}

/// Everything needed to fit one detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub method: Method,
    pub n_atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub train_perc: f64,
    pub train_drop_perc: f64,
    pub base_fraction: f64,
    pub kernel: KernelChoice,
    pub contamination: f64,
    pub seed: RngSeed,
    #[serde(default)]
    pub data_kind: DataKind,
}

impl DetectorConfig {
    /// Defaults for `method`: 50 atoms, sparsity 5, 20 iterations, base 10%
    /// of the training signals, rbf kernel, contamination 0.1.
    pub fn new(method: Method) -> Self {
        let (train_perc, train_drop_perc) = method.default_selection();
        DetectorConfig {
            method,
            n_atoms: 50,
            sparsity: 5,
            iterations: 20,
            train_perc,
            train_drop_perc,
            base_fraction: 0.10,
            kernel: KernelChoice::new(KernelFamily::Rbf),
            contamination: 0.1,
            seed: RngSeed(0),
            data_kind: DataKind::Real,
        }
    }

    pub fn with_kernel(mut self, family: KernelFamily) -> Self {
        self.kernel = KernelChoice::new(family);
        self
    }

    /// Display name, e.g. `DL` or `SRKDL-S rbf`.
    pub fn name(&self) -> String {
        if self.method.is_kernel() {
            format!("{} {}", self.method.label(), self.kernel.family.tag())
        } else {
            self.method.label().to_string()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contamination > 0.0 && self.contamination <= 0.5) {
            return Err(Error::param(
                "contamination",
                format!("{} not in (0, 0.5]", self.contamination),
            ));
        }
        if let Some(g) = self.kernel.gamma {
            if !(g > 0.0) {
                return Err(Error::param("gamma", format!("{g} must be positive")));
            }
        }
        self.dl_config().validate_fractions()
    }

    pub fn dl_config(&self) -> DlConfig {
        DlConfig {
            n_atoms: self.n_atoms,
            sparsity: self.sparsity,
            iterations: self.iterations,
            train_perc: self.train_perc,
            train_drop_perc: self.train_drop_perc,
            seed: self.seed,
        }
    }

    pub fn kdl_config<T: Real>(&self, dim: usize) -> Option<KdlConfig<T>> {
        Some(KdlConfig {
            dl: self.dl_config(),
            kernel: self.kernel.resolve(dim, self.data_kind),
            base_fraction: self.base_fraction,
            base_kind: self.method.base_kind()?,
        })
    }

    /// Config of the plain linear DL run that provides the trained-dictionary
    /// base: `round(base_fraction * N)` atoms, same sparsity and iterations.
    pub fn base_dictionary_config(&self, n_signals: usize) -> DlConfig {
        let p = sample_size(n_signals, self.base_fraction);
        DlConfig {
            n_atoms: p,
            sparsity: self.sparsity.min(p),
            iterations: self.iterations,
            train_perc: 1.0,
            train_drop_perc: 0.0,
            seed: self.seed.derive("rkdl/base-dictionary", 0),
        }
    }
}

/// Trained representation of a detector.
#[derive(Clone, Debug, PartialEq)]
pub enum Fitted<T> {
    Linear(Dictionary<T>),
    Kernel(KernelModel<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel<T> {
    config: DetectorConfig,
    fitted: Fitted<T>,
    training_scores: Vec<T>,
    threshold: T,
    preprocessor: Preprocessor<T>,
}

/// `sorted[ceil(q * (N - 1))]`, numpy's "higher" quantile.
pub fn higher_quantile<T: Real>(values: &[T], q: f64) -> T {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = q * (sorted.len() - 1) as f64;
    let idx = ((pos - 1e-9 * pos.max(1.0)).ceil().max(0.0) as usize).min(sorted.len() - 1);
    sorted[idx]
}

/// Fits a detector on normalized training signals.
pub fn fit<T: Real>(train: &SignalMatrix<T>, cfg: &DetectorConfig) -> Result<DetectorModel<T>> {
    fit_with_base(train, cfg, None)
}

/// Like [`fit`], reusing `base_dict` as the trained-dictionary base of the
/// RKDL-D variants instead of training one.
pub fn fit_with_base<T: Real>(
    train: &SignalMatrix<T>,
    cfg: &DetectorConfig,
    base_dict: Option<&Dictionary<T>>,
) -> Result<DetectorModel<T>> {
    cfg.validate()?;
    let fitted = match cfg.kdl_config::<T>(train.dim()) {
        None => Fitted::Linear(train_dl(train, &cfg.dl_config())?),
        Some(kcfg) => {
            let owned;
            let pre = match (kcfg.base_kind, base_dict) {
                (BaseKind::TrainedDict, None) => {
                    owned = train_dl(train, &cfg.base_dictionary_config(train.len()))?;
                    Some(&owned)
                }
                (BaseKind::TrainedDict, Some(d)) => Some(d),
                (BaseKind::Sampled, _) => None,
            };
            Fitted::Kernel(train_rkdl(train, &kcfg, pre)?)
        }
    };
    let mut model = DetectorModel {
        config: cfg.clone(),
        fitted,
        training_scores: Vec::new(),
        threshold: T::zero(),
        preprocessor: Preprocessor::Identity,
    };
    model.training_scores = model.decision_scores(train)?;
    model.threshold = higher_quantile(&model.training_scores, 1.0 - cfg.contamination);
    Ok(model)
}

impl<T: Real> DetectorModel<T> {
    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn method(&self) -> Method {
        self.config.method
    }

    pub fn fitted(&self) -> &Fitted<T> {
        &self.fitted
    }

    pub fn training_scores(&self) -> &[T] {
        &self.training_scores
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn preprocessor(&self) -> &Preprocessor<T> {
        &self.preprocessor
    }

    /// Attaches the normalization applied to raw data by [`Self::score_raw`].
    pub fn with_preprocessor(mut self, p: Preprocessor<T>) -> Self {
        self.preprocessor = p;
        self
    }

    /// Signal dimension the model expects.
    pub fn dim(&self) -> usize {
        match &self.fitted {
            Fitted::Linear(d) => d.dim(),
            Fitted::Kernel(k) => k.base.dim(),
        }
    }

    /// Representation error norm of each column of already-normalized `y`.
    pub fn decision_scores(&self, y: &SignalMatrix<T>) -> Result<Vec<T>> {
        if y.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.dim(),
            });
        }
        let s = self.config.sparsity;
        match &self.fitted {
            Fitted::Linear(d) => batch_code_with_residuals(d, y, s).map(|(_, r)| r),
            Fitted::Kernel(k) => {
                let coder = KernelCoder::new(&k.base, &k.dict)?;
                let kernel = k.base.kernel();
                (0..y.len())
                    .into_par_iter()
                    .map(|l| {
                        let yl = y.signal(l);
                        coder
                            .code(&k.base.kernel_column(yl), kernel.eval(yl, yl), s)
                            .map(|r| r.err2.sqrt())
                    })
                    .collect()
            }
        }
    }

    /// Applies the attached preprocessor, then scores.
    pub fn score_raw(&self, y: &SignalMatrix<T>) -> Result<Vec<T>> {
        if y.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.dim(),
            });
        }
        self.decision_scores(&self.preprocessor.apply(y)?)
    }

    /// 1 for scores strictly above the threshold.
    pub fn predict(&self, y: &SignalMatrix<T>) -> Result<Vec<u8>> {
        Ok(self.labels_for(&self.decision_scores(y)?))
    }

    pub fn labels_for(&self, scores: &[T]) -> Vec<u8> {
        scores.iter().map(|&s| u8::from(s > self.threshold)).collect()
    }
}

// ---------------------------------------------------------------------------
// persistence

const FORMAT: &str = "dlod-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixRecord {
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
}

impl MatrixRecord {
    fn from_mat<T: Real>(m: &Mat<T>) -> Self {
        MatrixRecord {
            rows: m.rows(),
            cols: m.cols(),
            data: m.to_row_major().into_iter().map(Real::as_f64).collect(),
        }
    }

    fn to_mat<T: Real>(&self) -> Result<Mat<T>> {
        let data: Vec<T> = self.data.iter().map(|&v| T::lit(v)).collect();
        Mat::from_row_major(self.rows, self.cols, &data)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PreprocessorRecord {
    Identity,
    Unit,
    Standardize { mean: Vec<f64>, scale: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
struct KernelRecord {
    spec: KernelSpec<f64>,
    base_kind: BaseKind,
    base: MatrixRecord,
    coefficients: MatrixRecord,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    version: u32,
    scalar: String,
    config: DetectorConfig,
    threshold: f64,
    training_scores: Vec<f64>,
    preprocessor: PreprocessorRecord,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    dictionary: Option<MatrixRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    kernel: Option<KernelRecord>,
}

fn to_f64s<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|&x| x.as_f64()).collect()
}

fn from_f64s<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

impl<T: Real> DetectorModel<T> {
    /// Versioned JSON container; matrices are row-major `f64`.
    pub fn to_json(&self) -> String {
        let (dictionary, kernel) = match &self.fitted {
            Fitted::Linear(d) => (Some(MatrixRecord::from_mat(d.atoms())), None),
            Fitted::Kernel(k) => {
                let spec = match *k.base.kernel() {
                    KernelSpec::Rbf { gamma } => KernelSpec::Rbf { gamma: gamma.as_f64() },
                    KernelSpec::Polynomial { gamma, offset, degree } => KernelSpec::Polynomial {
                        gamma: gamma.as_f64(),
                        offset: offset.as_f64(),
                        degree,
                    },
                };
                let rec = KernelRecord {
                    spec,
                    base_kind: k.base.kind(),
                    base: MatrixRecord::from_mat(k.base.signals().as_mat()),
                    coefficients: MatrixRecord::from_mat(k.dict.coeffs()),
                };
                (None, Some(rec))
            }
        };
        let preprocessor = match &self.preprocessor {
            Preprocessor::Identity => PreprocessorRecord::Identity,
            Preprocessor::UnitColumns => PreprocessorRecord::Unit,
            Preprocessor::Standardize { mean, scale } => PreprocessorRecord::Standardize {
                mean: to_f64s(mean),
                scale: to_f64s(scale),
            },
        };
        let record = ModelRecord {
            format: FORMAT.to_string(),
            version: VERSION,
            scalar: std::any::type_name::<T>().to_string(),
            config: self.config.clone(),
            threshold: self.threshold.as_f64(),
            training_scores: to_f64s(&self.training_scores),
            preprocessor,
            dictionary,
            kernel,
        };
        serde_json::to_string_pretty(&record).expect("model record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ModelRecord = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if rec.format != FORMAT {
            return Err(Error::Format(format!("not a model file (format `{}`)", rec.format)));
        }
        if rec.version != VERSION {
            return Err(Error::Format(format!("unsupported model version {}", rec.version)));
        }
        let fitted = match (rec.dictionary, rec.kernel, rec.config.method.is_kernel()) {
            (Some(d), None, false) => Fitted::Linear(Dictionary::from_unit_atoms(d.to_mat()?)?),
            (None, Some(k), true) => {
                let spec = match k.spec {
                    KernelSpec::Rbf { gamma } => KernelSpec::rbf(T::lit(gamma)),
                    KernelSpec::Polynomial { gamma, offset, degree } => {
                        KernelSpec::polynomial(T::lit(gamma), T::lit(offset), degree)
                    }
                };
                let base = KernelBase::new(spec, SignalMatrix::new(k.base.to_mat()?)?, k.base_kind)?;
                let dict = KernelDictionary::from_normalized(&base, k.coefficients.to_mat()?)?;
                Fitted::Kernel(KernelModel { base, dict })
            }
            _ => return Err(Error::Format("fitted matrices do not match the method".into())),
        };
        let preprocessor = match rec.preprocessor {
            PreprocessorRecord::Identity => Preprocessor::Identity,
            PreprocessorRecord::Unit => Preprocessor::UnitColumns,
            PreprocessorRecord::Standardize { mean, scale } => Preprocessor::Standardize {
                mean: from_f64s(&mean),
                scale: from_f64s(&scale),
            },
        };
        Ok(DetectorModel {
            config: rec.config,
            fitted,
            training_scores: from_f64s(&rec.training_scores),
            threshold: T::lit(rec.threshold),
            preprocessor,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
