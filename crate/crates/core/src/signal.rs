//! Signal sets, dictionaries and sparse codes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, norm, Mat};
use crate::scalar::Real;

/// Columns with a norm at or below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// `m x N` matrix whose columns are signals.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalMatrix<T> {
    data: Mat<T>,
}

impl<T: Real> SignalMatrix<T> {
    pub fn new(data: Mat<T>) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::EmptyMatrix {
                rows: data.rows(),
                cols: data.cols(),
            });
        }
        for j in 0..data.cols() {
            if let Some(i) = data.col(j).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        Ok(SignalMatrix { data })
    }

    pub fn from_columns<C: AsRef<[T]>>(dim: usize, columns: &[C]) -> Result<Self> {
        Self::new(Mat::from_columns(dim, columns)?)
    }

    /// Signal dimension `m`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.data.rows()
    }

    /// Number of signals `N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn signal(&self, j: usize) -> &[T] {
        self.data.col(j)
    }

    pub fn as_mat(&self) -> &Mat<T> {
        &self.data
    }

    pub fn into_mat(self) -> Mat<T> {
        self.data
    }

    /// Scales every column to unit Euclidean norm.
    pub fn normalize_columns(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for j in 0..data.cols() {
            normalize_in_place(data.col_mut(j)).ok_or(Error::ZeroColumn(j))?;
        }
        Ok(SignalMatrix { data })
    }

    /// Selects columns in the given order (`Y * P` for a zero-extended
    /// permutation `P`).
    pub fn column_subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut seen = vec![false; self.len()];
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::DuplicateIndex(i));
            }
        }
        Ok(SignalMatrix {
            data: self.data.select_columns(indices),
        })
    }
}

/// Normalizes `v` in place, returning its previous norm, or `None` for a
/// (near) zero vector.
pub(crate) fn normalize_in_place<T: Real>(v: &mut [T]) -> Option<T> {
    let n = norm(v);
    if !(n > T::lit(ZERO_NORM)) {
        return None;
    }
    let inv = n.recip();
    v.iter_mut().for_each(|x| *x *= inv);
    Some(n)
}

/// `m x n` matrix of unit-norm atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary<T> {
    atoms: Mat<T>,
}

impl<T: Real> Dictionary<T> {
    /// Normalizes the columns of `atoms` and wraps them.
    pub fn from_atoms(atoms: Mat<T>) -> Result<Self> {
        let normalized = SignalMatrix::new(atoms)?.normalize_columns()?;
        Ok(Dictionary {
            atoms: normalized.into_mat(),
        })
    }

    /// Wraps atoms that must already have unit norm.
    pub fn from_unit_atoms(atoms: Mat<T>) -> Result<Self> {
        if atoms.rows() == 0 || atoms.cols() == 0 {
            return Err(Error::EmptyMatrix {
                rows: atoms.rows(),
                cols: atoms.cols(),
            });
        }
        if !atoms.is_finite() {
            return Err(Error::Format("non-finite dictionary entry".into()));
        }
        for j in 0..atoms.cols() {
            let n = norm(atoms.col(j));
            if (n - T::one()).abs() > T::unit_tol() {
                return Err(Error::NotUnitNorm {
                    atom: j,
                    norm: n.as_f64(),
                });
            }
        }
        Ok(Dictionary { atoms })
    }

    pub(crate) fn from_unit_atoms_unchecked(atoms: Mat<T>) -> Self {
        Dictionary { atoms }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.atoms.rows()
    }

    #[inline]
    pub fn n_atoms(&self) -> usize {
        self.atoms.cols()
    }

    #[inline]
    pub fn atom(&self, j: usize) -> &[T] {
        self.atoms.col(j)
    }

    pub fn atoms(&self) -> &Mat<T> {
        &self.atoms
    }

    /// Largest `| ||d_j|| - 1 |` over all atoms.
    pub fn max_norm_deviation(&self) -> T {
        (0..self.n_atoms())
            .map(|j| (norm(self.atom(j)) - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// `D x` for a sparse `x`.
    pub fn reconstruct(&self, x: &SparseVector<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (&j, &c) in x.support.iter().zip(&x.coeffs) {
            axpy(c, self.atom(j), &mut out);
        }
        out
    }

    /// `||y - D x||`
    pub fn residual_norm(&self, y: &[T], x: &SparseVector<T>) -> T {
        let approx = self.reconstruct(x);
        y.iter()
            .zip(&approx)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }
}

/// Sparse column: atom indices with their coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector<T> {
    pub support: Vec<usize>,
    pub coeffs: Vec<T>,
}

impl<T: Real> SparseVector<T> {
    pub fn new(support: Vec<usize>, coeffs: Vec<T>) -> Self {
        assert_eq!(support.len(), coeffs.len());
        SparseVector { support, coeffs }
    }

    pub fn empty() -> Self {
        SparseVector {
            support: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    /// Coefficient of atom `j` (zero when not in the support).
    pub fn get(&self, j: usize) -> T {
        self.support
            .iter()
            .position(|&s| s == j)
            .map_or(T::zero(), |k| self.coeffs[k])
    }

    pub fn to_dense(&self, n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n];
        for (&j, &c) in self.support.iter().zip(&self.coeffs) {
            out[j] = c;
        }
        out
    }
}

/// `n x N` sparse representation stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCode<T> {
    n_atoms: usize,
    sparsity: usize,
    columns: Vec<SparseVector<T>>,
}

impl<T: Real> SparseCode<T> {
    pub fn new(n_atoms: usize, sparsity: usize, columns: Vec<SparseVector<T>>) -> Result<Self> {
        for (l, c) in columns.iter().enumerate() {
            if c.support.len() != c.coeffs.len() {
                return Err(Error::InvalidCode(format!("column {l}: support/coefficient length")));
            }
            if c.nnz() > sparsity {
                return Err(Error::InvalidCode(format!(
                    "column {l} has {} nonzeros, bound is {sparsity}",
                    c.nnz()
                )));
            }
            let mut seen = vec![false; n_atoms];
            for &j in &c.support {
                if j >= n_atoms {
                    return Err(Error::InvalidCode(format!("column {l}: atom {j} >= {n_atoms}")));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidCode(format!("column {l}: atom {j} repeated")));
                }
            }
        }
        Ok(SparseCode {
            n_atoms,
            sparsity,
            columns,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    /// Number of coded signals `N`.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, l: usize) -> &SparseVector<T> {
        &self.columns[l]
    }

    pub fn columns(&self) -> &[SparseVector<T>] {
        &self.columns
    }

    pub(crate) fn coeff_mut(&mut self, l: usize, slot: usize) -> &mut T {
        &mut self.columns[l].coeffs[slot]
    }

    /// Keeps only the given columns, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        SparseCode {
            n_atoms: self.n_atoms,
            sparsity: self.sparsity,
            columns: indices.iter().map(|&l| self.columns[l].clone()).collect(),
        }
    }

    /// For every atom, the `(column, slot)` pairs of the columns using it.
    pub fn usage(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.n_atoms];
        for (l, c) in self.columns.iter().enumerate() {
            for (slot, &j) in c.support.iter().enumerate() {
                out[j].push((l, slot));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.n_atoms, self.columns.len());
        for (l, c) in self.columns.iter().enumerate() {
            for (&j, &v) in c.support.iter().zip(&c.coeffs) {
                out[(j, l)] = v;
            }
        }
        out
    }
}

/// How raw signals are normalized before fitting or scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Unit Euclidean norm per signal.
    #[default]
    Unit,
    /// Zero mean and unit variance per feature, statistics from the training side.
    Standardize,
    None,
}

/// A normalization fitted on training data and reusable on new data.
#[derive(Clone, Debug, PartialEq)]
pub enum Preprocessor<T> {
    Identity,
    UnitColumns,
    Standardize { mean: Vec<T>, scale: Vec<T> },
}

impl<T: Real> Preprocessor<T> {
    pub fn fit(kind: Normalization, train: &SignalMatrix<T>) -> Self {
        match kind {
            Normalization::None => Preprocessor::Identity,
            Normalization::Unit => Preprocessor::UnitColumns,
            Normalization::Standardize => {
                let n = T::from_usize(train.len()).unwrap();
                let m = train.dim();
                let mut mean = vec![T::zero(); m];
                for l in 0..train.len() {
                    axpy(T::one(), train.signal(l), &mut mean);
                }
                mean.iter_mut().for_each(|v| *v /= n);
                let mut var = vec![T::zero(); m];
                for l in 0..train.len() {
                    for (i, &v) in train.signal(l).iter().enumerate() {
                        var[i] += (v - mean[i]) * (v - mean[i]);
                    }
                }
                // constant features keep scale 1, like sklearn's StandardScaler
                let scale = var
                    .into_iter()
                    .map(|v| {
                        let s = (v / n).sqrt();
                        if s > T::lit(ZERO_NORM) {
                            s
                        } else {
                            T::one()
                        }
                    })
                    .collect();
                Preprocessor::Standardize { mean, scale }
            }
        }
    }

    pub fn apply(&self, y: &SignalMatrix<T>) -> Result<SignalMatrix<T>> {
        match self {
            Preprocessor::Identity => Ok(y.clone()),
            Preprocessor::UnitColumns => y.normalize_columns(),
            Preprocessor::Standardize { mean, scale } => {
                if mean.len() != y.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: mean.len(),
                        found: y.dim(),
                    });
                }
                let m = y.as_mat();
                SignalMatrix::new(Mat::from_fn(m.rows(), m.cols(), |i, j| {
                    (m[(i, j)] - mean[i]) / scale[i]
                }))
            }
        }
    }
}
