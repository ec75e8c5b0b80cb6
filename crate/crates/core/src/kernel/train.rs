use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dl::{drop_worst, sample_size, select_train_indices, DlConfig};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::RngSeed;
use crate::scalar::Real;
use crate::signal::{Dictionary, SignalMatrix, SparseCode};

use super::{rkdl_d_pass, rkdl_s_pass, KernelBase, KernelCoder, KernelDictionary, KernelSpec};

/// What the kernel atoms are expressed over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    /// A random batch of training signals, drawn once before training.
    Sampled,
    /// The atoms of a linear dictionary trained beforehand.
    TrainedDict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdlConfig<T> {
    pub dl: DlConfig,
    pub kernel: KernelSpec<T>,
    /// Sampled base size as a fraction of the training signals.
    pub base_fraction: f64,
    pub base_kind: BaseKind,
}

impl<T: Real> KdlConfig<T> {
    pub fn new(kernel: KernelSpec<T>, base_kind: BaseKind) -> Self {
        KdlConfig {
            dl: DlConfig::default(),
            kernel,
            base_fraction: 0.10,
            base_kind,
        }
    }

    /// Selective defaults: 80% sampled, 30% of those dropped.
    pub fn selective(kernel: KernelSpec<T>, base_kind: BaseKind) -> Self {
        let mut cfg = Self::new(kernel, base_kind);
        cfg.dl.train_perc = 0.8;
        cfg.dl.train_drop_perc = 0.3;
        cfg
    }

    /// Base size for `n_signals` training signals.
    pub fn base_size(&self, n_signals: usize) -> usize {
        sample_size(n_signals, self.base_fraction)
    }

    pub fn validate(&self, n_signals: usize) -> Result<()> {
        self.kernel.validate()?;
        if !(self.base_fraction > 0.0 && self.base_fraction <= 1.0) {
            return Err(Error::param(
                "base_fraction",
                format!("{} not in (0, 1]", self.base_fraction),
            ));
        }
        self.dl.validate(n_signals)
    }
}

/// Fitted reduced kernel dictionary together with its base.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel<T> {
    pub base: KernelBase<T>,
    pub dict: KernelDictionary<T>,
}

/// Initial coefficients: the first `min(n, p)` atoms are the feature images of
/// distinct base elements in random order, any further atoms random
/// combinations of the base. Columns are feature-normalized.
pub fn init_coefficients<T: Real>(base: &KernelBase<T>, n: usize, seed: RngSeed) -> Result<KernelDictionary<T>> {
    let p = base.size();
    let mut rng = seed.rng();
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut a = Mat::zeros(p, n);
    for j in 0..n {
        if j < p {
            a[(order[j], j)] = T::one();
        } else {
            for i in 0..p {
                a[(i, j)] = T::lit(rng.sample::<f64, _>(StandardNormal));
            }
        }
    }
    KernelDictionary::new(base, a)
}

/// Trains a reduced kernel dictionary on normalized signals.
///
/// `pre_trained` supplies the base for [`BaseKind::TrainedDict`] and is
/// ignored for a sampled base. Each iteration codes the sampled subset with
/// Kernel OMP, drops the worst represented fraction and runs one update pass
/// on the rest; with `train_perc = 1` and no dropout this is plain RKDL.
pub fn train_rkdl<T: Real>(
    signals: &SignalMatrix<T>,
    cfg: &KdlConfig<T>,
    pre_trained: Option<&Dictionary<T>>,
) -> Result<KernelModel<T>> {
    cfg.validate(signals.len())?;
    let seed = cfg.dl.seed;
    let base_signals = match cfg.base_kind {
        BaseKind::Sampled => {
            let p = cfg.base_size(signals.len());
            let mut idx = index::sample(&mut seed.derive("rkdl/base", 0).rng(), signals.len(), p).into_vec();
            idx.sort_unstable();
            signals.column_subset(&idx)?
        }
        BaseKind::TrainedDict => {
            let d = pre_trained.ok_or_else(|| Error::param("pre_trained", "a trained-dictionary base needs a linear dictionary"))?;
            if d.dim() != signals.dim() {
                return Err(Error::DimensionMismatch {
                    expected: signals.dim(),
                    found: d.dim(),
                });
            }
            SignalMatrix::new(d.atoms().clone())?
        }
    };
    let base = KernelBase::new(cfg.kernel, base_signals, cfg.base_kind)?;
    let cross = base.cross_gram(signals)?;
    let k_diag: Vec<T> = (0..signals.len())
        .map(|l| cfg.kernel.eval(signals.signal(l), signals.signal(l)))
        .collect();

    let mut dict = init_coefficients(&base, cfg.dl.n_atoms, seed.derive("rkdl/init", 0))?;
    for it in 0..cfg.dl.iterations {
        let sel = select_train_indices(signals.len(), cfg.dl.train_perc, seed.derive("rkdl/select", it as u64));
        let coder = KernelCoder::new(&base, &dict)?;
        let coded: Vec<_> = sel
            .par_iter()
            .map(|&l| coder.code(&cross.row(l), k_diag[l], cfg.dl.sparsity))
            .collect::<Result<_>>()?;
        let errors: Vec<T> = coded.iter().map(|r| r.err2).collect();
        let keep = drop_worst(&errors, cfg.dl.train_drop_perc);
        let rows: Vec<usize> = keep.iter().map(|&k| sel[k]).collect();
        let code = SparseCode::new(
            dict.n_atoms(),
            cfg.dl.sparsity,
            keep.iter().map(|&k| coded[k].code.clone()).collect(),
        )?;
        let cross_sel = cross.select_rows(&rows);
        dict = match cfg.base_kind {
            BaseKind::Sampled => rkdl_s_pass(base.gram(), &cross_sel, &dict, &code)?.0,
            BaseKind::TrainedDict => rkdl_d_pass(base.gram(), &cross_sel, &dict, &code)?.0,
        };
        log::trace!("rkdl iteration {it}: {} coded, {} updated", sel.len(), rows.len());
    }
    Ok(KernelModel { base, dict })
}
