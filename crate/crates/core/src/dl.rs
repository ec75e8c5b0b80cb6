//! Linear dictionary learning: AK-SVD alternate optimization and its
//! selective variant.
//!
//! One training iteration samples `train_perc` of the signals, codes them
//! with OMP, drops the `train_drop_perc` worst represented of those and runs
//! one AK-SVD pass on the rest. With `train_perc = 1` and
//! `train_drop_perc = 0` this is plain dictionary learning.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, Mat};
use crate::omp::batch_code_with_residuals;
use crate::rng::RngSeed;
use crate::scalar::Real;
use crate::signal::{normalize_in_place, Dictionary, SignalMatrix, SparseCode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlConfig {
    pub n_atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    /// Fraction of signals kept by the per-iteration random sampling.
    pub train_perc: f64,
    /// Fraction of the sampled signals dropped before the dictionary update.
    pub train_drop_perc: f64,
    pub seed: RngSeed,
}

impl Default for DlConfig {
    fn default() -> Self {
        DlConfig {
            n_atoms: 50,
            sparsity: 5,
            iterations: 20,
            train_perc: 1.0,
            train_drop_perc: 0.0,
            seed: RngSeed(0),
        }
    }
}

impl DlConfig {
    /// Defaults of the selective variant: 70% sampled, 40% of those dropped.
    pub fn selective() -> Self {
        DlConfig {
            train_perc: 0.7,
            train_drop_perc: 0.4,
            ..Self::default()
        }
    }

    pub fn is_selective(&self) -> bool {
        self.train_perc < 1.0 || self.train_drop_perc > 0.0
    }

    pub(crate) fn validate_fractions(&self) -> Result<()> {
        if !(self.train_perc > 0.0 && self.train_perc <= 1.0) {
            return Err(Error::param("train_perc", format!("{} not in (0, 1]", self.train_perc)));
        }
        if !(self.train_drop_perc >= 0.0 && self.train_drop_perc < 1.0) {
            return Err(Error::param(
                "train_drop_perc",
                format!("{} not in [0, 1)", self.train_drop_perc),
            ));
        }
        if self.n_atoms == 0 {
            return Err(Error::param("n_atoms", "must be positive"));
        }
        if self.sparsity == 0 || self.sparsity > self.n_atoms {
            return Err(Error::InvalidSparsity {
                sparsity: self.sparsity,
                n_atoms: self.n_atoms,
            });
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations", "must be positive"));
        }
        Ok(())
    }

    /// Signals left for the dictionary update out of `n_signals`.
    pub fn retained_count(&self, n_signals: usize) -> usize {
        let sampled = sample_size(n_signals, self.train_perc);
        sampled - drop_count(sampled, self.train_drop_perc)
    }

    /// Checks the fractions and that at least `n_atoms` signals survive both
    /// selections.
    pub fn validate(&self, n_signals: usize) -> Result<()> {
        self.validate_fractions()?;
        let available = self.retained_count(n_signals).min(n_signals);
        if available < self.n_atoms {
            return Err(Error::TooFewSignals {
                available,
                required: self.n_atoms,
            });
        }
        Ok(())
    }
}

/// `round(frac * n)`, half up, at least one.
pub(crate) fn sample_size(n: usize, frac: f64) -> usize {
    ((frac * n as f64 + 0.5).floor() as usize).clamp(1, n.max(1))
}

/// `ceil(frac * count)`, ignoring representation noise like `0.4 * 5 = 2.0000000000000004`.
pub(crate) fn drop_count(count: usize, frac: f64) -> usize {
    if frac <= 0.0 {
        return 0;
    }
    let exact = frac * count as f64;
    ((exact - 1e-9 * exact.max(1.0)).ceil().max(0.0) as usize).min(count)
}

/// `n` distinct random columns of `signals`, normalized. Zero columns are
/// skipped in favour of the next candidate.
pub fn init_dictionary<T: Real>(signals: &SignalMatrix<T>, n: usize, seed: RngSeed) -> Result<Dictionary<T>> {
    if n == 0 || n > signals.len() {
        return Err(Error::TooFewSignals {
            available: signals.len(),
            required: n.max(1),
        });
    }
    let mut order: Vec<usize> = (0..signals.len()).collect();
    order.shuffle(&mut seed.rng());
    let mut atoms = Vec::with_capacity(n);
    let mut last_zero = None;
    for &l in &order {
        let mut a = signals.signal(l).to_vec();
        if normalize_in_place(&mut a).is_some() {
            atoms.push(a);
            if atoms.len() == n {
                break;
            }
        } else {
            last_zero = Some(l);
        }
    }
    if atoms.len() < n {
        return Err(Error::ZeroColumn(last_zero.unwrap_or(0)));
    }
    Ok(Dictionary::from_unit_atoms_unchecked(Mat::from_columns(signals.dim(), &atoms)?))
}

/// Uniform sample of `round(train_perc * n)` distinct indices, sorted.
/// `train_perc = 1` returns `0..n` without touching the stream.
pub fn select_train_indices(n: usize, train_perc: f64, seed: RngSeed) -> Vec<usize> {
    let k = sample_size(n, train_perc);
    if k >= n {
        return (0..n).collect();
    }
    let mut idx = index::sample(&mut seed.rng(), n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Positions retained after dropping the `ceil(train_drop_perc * len)` largest
/// errors. Ties at the cut keep the lower index.
pub fn drop_worst<T: Real>(errors: &[T], train_drop_perc: f64) -> Vec<usize> {
    let k = drop_count(errors.len(), train_drop_perc);
    if k == 0 {
        return (0..errors.len()).collect();
    }
    let mut order: Vec<usize> = (0..errors.len()).collect();
    // descending error, then descending index, so the first k are the ones to drop
    order.sort_by(|&a, &b| {
        errors[b]
            .partial_cmp(&errors[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.cmp(&a))
    });
    let mut keep: Vec<usize> = order[k..].to_vec();
    keep.sort_unstable();
    keep
}

/// Mutable state of one AK-SVD pass, exposed so callers can observe the
/// objective between atom updates.
pub struct AksvdState<'a, T> {
    signals: &'a SignalMatrix<T>,
    atoms: Mat<T>,
    code: SparseCode<T>,
    residual: Mat<T>,
    usage: Vec<Vec<(usize, usize)>>,
    used_as_replacement: Vec<bool>,
}

impl<'a, T: Real> AksvdState<'a, T> {
    pub fn new(dict: &Dictionary<T>, signals: &'a SignalMatrix<T>, code: &SparseCode<T>) -> Result<Self> {
        if dict.dim() != signals.dim() {
            return Err(Error::DimensionMismatch {
                expected: dict.dim(),
                found: signals.dim(),
            });
        }
        if code.len() != signals.len() || code.n_atoms() != dict.n_atoms() {
            return Err(Error::InvalidCode(format!(
                "code is {}x{}, expected {}x{}",
                code.n_atoms(),
                code.len(),
                dict.n_atoms(),
                signals.len()
            )));
        }
        let mut residual = signals.as_mat().clone();
        for l in 0..signals.len() {
            let c = code.column(l);
            for (&j, &v) in c.support.iter().zip(&c.coeffs) {
                axpy(-v, dict.atom(j), residual.col_mut(l));
            }
        }
        Ok(AksvdState {
            signals,
            atoms: dict.atoms().clone(),
            usage: code.usage(),
            code: code.clone(),
            residual,
            used_as_replacement: vec![false; signals.len()],
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.cols()
    }

    /// `||Y - D X||_F^2` for the current state.
    pub fn objective(&self) -> T {
        self.residual.frobenius_sq()
    }

    /// Updates atom `j` and then its coefficient row, supports fixed.
    pub fn update_atom(&mut self, j: usize) {
        let users = &self.usage[j];
        if users.is_empty() {
            self.replace_unused(j);
            return;
        }
        let m = self.atoms.rows();
        let x: Vec<T> = users.iter().map(|&(l, s)| self.code.column(l).coeffs[s]).collect();
        if x.iter().all(|&v| v == T::zero()) {
            return;
        }
        // F = E_I + d_j x^T, kept in place in the residual columns
        for (&(l, _), &xl) in users.iter().zip(&x) {
            let (atom, res) = (self.atoms.col(j), self.residual.col_mut(l));
            axpy(xl, atom, res);
        }
        let mut d = vec![T::zero(); m];
        for (&(l, _), &xl) in users.iter().zip(&x) {
            axpy(xl, self.residual.col(l), &mut d);
        }
        if normalize_in_place(&mut d).is_some() {
            self.atoms.col_mut(j).copy_from_slice(&d);
        }
        let atom = self.atoms.col(j).to_vec();
        for &(l, s) in users {
            let xl = dot(&atom, self.residual.col(l));
            *self.code.coeff_mut(l, s) = xl;
            axpy(-xl, &atom, self.residual.col_mut(l));
        }
    }

    /// Swaps an unused atom for the worst represented signal not already
    /// used as a replacement in this pass.
    fn replace_unused(&mut self, j: usize) {
        let mut worst = None;
        let mut worst_err = T::zero();
        for l in 0..self.signals.len() {
            if self.used_as_replacement[l] {
                continue;
            }
            let e = norm(self.residual.col(l));
            if e > worst_err {
                worst_err = e;
                worst = Some(l);
            }
        }
        let Some(l) = worst else { return };
        if worst_err <= T::vanishing() {
            return;
        }
        let mut a = self.signals.signal(l).to_vec();
        if normalize_in_place(&mut a).is_some() {
            self.atoms.col_mut(j).copy_from_slice(&a);
            self.used_as_replacement[l] = true;
        }
    }

    pub fn into_parts(self) -> (Dictionary<T>, SparseCode<T>) {
        (Dictionary::from_unit_atoms_unchecked(self.atoms), self.code)
    }
}

/// One sweep of AK-SVD over all atoms in order.
pub fn aksvd_pass<T: Real>(
    dict: &Dictionary<T>,
    signals: &SignalMatrix<T>,
    code: &SparseCode<T>,
) -> Result<(Dictionary<T>, SparseCode<T>)> {
    let mut state = AksvdState::new(dict, signals, code)?;
    for j in 0..state.n_atoms() {
        state.update_atom(j);
    }
    Ok(state.into_parts())
}

/// Trains a dictionary on normalized signals.
pub fn train_dl<T: Real>(signals: &SignalMatrix<T>, cfg: &DlConfig) -> Result<Dictionary<T>> {
    cfg.validate(signals.len())?;
    let mut dict = init_dictionary(signals, cfg.n_atoms, cfg.seed.derive("dl/init", 0))?;
    for it in 0..cfg.iterations {
        let sel = select_train_indices(signals.len(), cfg.train_perc, cfg.seed.derive("dl/select", it as u64));
        let subset;
        let active = if sel.len() == signals.len() {
            signals
        } else {
            subset = signals.column_subset(&sel)?;
            &subset
        };
        let (code, errors) = batch_code_with_residuals(&dict, active, cfg.sparsity)?;
        let keep = drop_worst(&errors, cfg.train_drop_perc);
        dict = if keep.len() == active.len() {
            aksvd_pass(&dict, active, &code)?.0
        } else {
            let retained = active.column_subset(&keep)?;
            aksvd_pass(&dict, &retained, &code.select(&keep))?.0
        };
        log::trace!("dl iteration {it}: {} coded, {} updated", active.len(), keep.len());
    }
    Ok(dict)
}
