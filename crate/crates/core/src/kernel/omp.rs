use crate::error::{Error, Result};
use crate::linalg::{solve_normal_equations, Mat};
use crate::omp::pick_atom;
use crate::scalar::Real;
use crate::signal::SparseVector;

use super::{KernelBase, KernelDictionary};

#[derive(Clone, Debug, PartialEq)]
pub struct KernelOmpResult<T> {
    pub code: SparseVector<T>,
    /// Squared feature-space residual, clamped at zero.
    pub err2: T,
}

/// Kernel OMP with the atom Gram `A^T K A` precomputed once for a dictionary.
pub struct KernelCoder<'a, T> {
    dict: &'a KernelDictionary<T>,
    atom_gram: Mat<T>,
}

impl<'a, T: Real> KernelCoder<'a, T> {
    pub fn new(base: &KernelBase<T>, dict: &'a KernelDictionary<T>) -> Result<Self> {
        if dict.coeffs().rows() != base.size() {
            return Err(Error::DimensionMismatch {
                expected: base.size(),
                found: dict.coeffs().rows(),
            });
        }
        let ka = base.gram().matmul(dict.coeffs());
        let atom_gram = dict.coeffs().tr_matmul(&ka);
        Ok(KernelCoder { dict, atom_gram })
    }

    pub fn n_atoms(&self) -> usize {
        self.dict.n_atoms()
    }

    /// Codes a signal given `k_y = k(B, y)` and `k_yy = k(y, y)`.
    ///
    /// Correlations with the feature-space residual are `A^T k_y - G x`, with
    /// `G = A^T K A`, so no feature vector is ever formed.
    pub fn code(&self, k_y: &[T], k_yy: T, sparsity: usize) -> Result<KernelOmpResult<T>> {
        let n = self.n_atoms();
        if k_y.len() != self.dict.coeffs().rows() {
            return Err(Error::DimensionMismatch {
                expected: self.dict.coeffs().rows(),
                found: k_y.len(),
            });
        }
        if sparsity == 0 || sparsity > n {
            return Err(Error::InvalidSparsity { sparsity, n_atoms: n });
        }
        let g = &self.atom_gram;
        let z = self.dict.coeffs().tr_matvec(k_y);
        let floor = T::epsilon() * T::lit(64.0) * k_yy.abs();

        let mut selected = vec![false; n];
        let mut support: Vec<usize> = Vec::with_capacity(sparsity);
        let mut coeffs: Vec<T> = Vec::new();
        let mut err2 = k_yy;

        while support.len() < sparsity && err2 > floor {
            let corr: Vec<T> = (0..n)
                .map(|j| {
                    let mut c = z[j];
                    for (&i, &x) in support.iter().zip(&coeffs) {
                        c -= g[(j, i)] * x;
                    }
                    c
                })
                .collect();
            let Some(j) = pick_atom(&corr, &selected) else { break };
            selected[j] = true;
            support.push(j);

            let k = support.len();
            let gs = Mat::from_fn(k, k, |a, b| g[(support[a], support[b])]);
            let rhs: Vec<T> = support.iter().map(|&a| z[a]).collect();
            coeffs = solve_normal_equations(&gs, &rhs)?;
            let gx = gs.matvec(&coeffs);
            let mut quad = T::zero();
            let mut lin = T::zero();
            for a in 0..k {
                lin += coeffs[a] * rhs[a];
                quad += coeffs[a] * gx[a];
            }
            err2 = k_yy - lin - lin + quad;
        }

        // below the floor the value is cancellation noise, not a residual
        let err2 = if err2 > floor { err2 } else { T::zero() };
        Ok(KernelOmpResult {
            code: SparseVector::new(support, coeffs),
            err2,
        })
    }

    /// Unclamped squared error of a given code (diagnostics and tests).
    pub fn error2(&self, k_y: &[T], k_yy: T, code: &SparseVector<T>) -> T {
        let z = self.dict.coeffs().tr_matvec(k_y);
        let mut err = k_yy;
        for (a, (&i, &xi)) in code.support.iter().zip(&code.coeffs).enumerate() {
            err -= T::lit(2.0) * xi * z[i];
            for (&j, &xj) in code.support.iter().zip(&code.coeffs).skip(a) {
                let w = if i == j { T::one() } else { T::lit(2.0) };
                err += w * xi * xj * self.atom_gram[(i, j)];
            }
        }
        err
    }
}

/// One-off Kernel OMP; use [`KernelCoder`] when coding many signals.
pub fn kernel_omp<T: Real>(
    base: &KernelBase<T>,
    dict: &KernelDictionary<T>,
    k_y: &[T],
    k_yy: T,
    sparsity: usize,
) -> Result<KernelOmpResult<T>> {
    KernelCoder::new(base, dict)?.code(k_y, k_yy, sparsity)
}

/// Feature-space representation error norm of `y`.
pub fn kernel_score<T: Real>(
    base: &KernelBase<T>,
    dict: &KernelDictionary<T>,
    y: &[T],
    sparsity: usize,
) -> Result<T> {
    if y.len() != base.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            found: y.len(),
        });
    }
    let k_y = base.kernel_column(y);
    let k_yy = base.kernel().eval(y, y);
    kernel_omp(base, dict, &k_y, k_yy, sparsity).map(|r| r.err2.sqrt())
}
