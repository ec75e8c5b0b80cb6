//! Orthogonal Matching Pursuit against a linear dictionary.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, solve_normal_equations, Mat};
use crate::scalar::Real;
use crate::signal::{Dictionary, SignalMatrix, SparseCode, SparseVector};

#[derive(Clone, Debug, PartialEq)]
pub struct OmpResult<T> {
    pub code: SparseVector<T>,
    pub residual_norm: T,
}

/// Index of the unselected entry with the largest `|corr|`.
///
/// Values within a few ulps of the maximum count as tied and the lowest index
/// wins, so rounding noise cannot decide between equally good atoms.
pub(crate) fn pick_atom<T: Real>(corr: &[T], selected: &[bool]) -> Option<usize> {
    let best = corr
        .iter()
        .zip(selected)
        .filter(|(_, &s)| !s)
        .map(|(c, _)| c.abs())
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    if best <= T::zero() {
        return None;
    }
    let cut = best * (T::one() - T::epsilon() * T::lit(256.0));
    (0..corr.len()).find(|&j| !selected[j] && corr[j].abs() >= cut)
}

/// Greedy sparse coding of `y` with at most `sparsity` atoms.
///
/// Each step picks the unselected atom most correlated with the residual and
/// re-solves least squares on the whole support. Stops early once the
/// residual norm drops to `residual_tol` (or numerically to zero).
pub fn omp<T: Real>(
    dict: &Dictionary<T>,
    y: &[T],
    sparsity: usize,
    residual_tol: T,
) -> Result<OmpResult<T>> {
    let n = dict.n_atoms();
    if y.len() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: y.len(),
        });
    }
    if sparsity == 0 || sparsity > n {
        return Err(Error::InvalidSparsity {
            sparsity,
            n_atoms: n,
        });
    }

    let y_norm = norm(y);
    let floor = T::vanishing() * y_norm;
    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;
    let mut selected = vec![false; n];
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    let mut coeffs: Vec<T> = Vec::new();

    while support.len() < sparsity {
        if residual_norm <= residual_tol || residual_norm <= floor {
            break;
        }
        let corr: Vec<T> = (0..n).map(|j| dot(dict.atom(j), &residual)).collect();
        let Some(j) = pick_atom(&corr, &selected) else { break };
        selected[j] = true;
        support.push(j);

        let k = support.len();
        let gram = Mat::from_fn(k, k, |a, b| dot(dict.atom(support[a]), dict.atom(support[b])));
        let rhs: Vec<T> = support.iter().map(|&a| dot(dict.atom(a), y)).collect();
        coeffs = solve_normal_equations(&gram, &rhs)?;

        residual.copy_from_slice(y);
        for (&a, &c) in support.iter().zip(&coeffs) {
            axpy(-c, dict.atom(a), &mut residual);
        }
        residual_norm = norm(&residual);
    }

    Ok(OmpResult {
        code: SparseVector::new(support, coeffs),
        residual_norm,
    })
}

/// Codes every column of `signals`; column `l` equals `omp(dict, y_l, s, 0)`.
pub fn batch_code<T: Real>(
    dict: &Dictionary<T>,
    signals: &SignalMatrix<T>,
    sparsity: usize,
) -> Result<SparseCode<T>> {
    batch_code_with_residuals(dict, signals, sparsity).map(|(code, _)| code)
}

/// [`batch_code`] that also returns the per-signal residual norms.
pub fn batch_code_with_residuals<T: Real>(
    dict: &Dictionary<T>,
    signals: &SignalMatrix<T>,
    sparsity: usize,
) -> Result<(SparseCode<T>, Vec<T>)> {
    if signals.dim() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: signals.dim(),
        });
    }
    let results: Vec<OmpResult<T>> = (0..signals.len())
        .into_par_iter()
        .map(|l| {
            omp(dict, signals.signal(l), sparsity, T::zero()).map_err(|e| Error::Column {
                column: l,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut columns = Vec::with_capacity(results.len());
    let mut residuals = Vec::with_capacity(results.len());
    for r in results {
        columns.push(r.code);
        residuals.push(r.residual_norm);
    }
    Ok((SparseCode::new(dict.n_atoms(), sparsity, columns)?, residuals))
}
