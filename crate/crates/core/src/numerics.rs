//! Dense symmetric linear algebra.
//!
//! Everything in this crate is dense: problem sizes stay in the hundreds, so a
//! plain row-wise Cholesky and an `O(n^3)` symmetric eigensolver are enough.
//! Non positive definite inputs are reported as errors; no jitter is ever
//! added behind the caller's back.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Dense symmetric `n x n` matrix, `n >= 1`.
///
/// Symmetry is exact: constructors either reject asymmetric input or mirror
/// one triangle onto the other.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    /// Accepts `m` only if it is square and exactly symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::EmptyMatrix);
        }
        let n = m.nrows();
        for i in 0..n {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SymMatrix { data: m })
    }

    /// Replaces `m` by `(m + m^T) / 2`.
    pub fn symmetrize(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::EmptyMatrix);
        }
        let n = m.nrows();
        let mut data = m;
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = avg;
                data[(j, i)] = avg;
            }
        }
        Ok(SymMatrix { data })
    }

    /// Builds a matrix from row slices; rejects ragged or asymmetric input.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Evaluates `f(i, j)` on the lower triangle (`j <= i`) and mirrors it.
    ///
    /// # Panics
    ///
    /// Panics if `n == 0`.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n >= 1, "SymMatrix requires n >= 1");
        let mut data = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        SymMatrix { data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_lower_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_lower_fn(n, |_, _| 0.0)
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self::from_lower_fn(values.len(), |i, j| {
            if i == j {
                values[i]
            } else {
                0.0
            }
        }))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.data[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.data[(i, i)]).sum()
    }

    /// `self + s * I`.
    pub fn add_diagonal(&self, s: f64) -> Self {
        let mut data = self.data.clone();
        for i in 0..self.n() {
            data[(i, i)] += s;
        }
        SymMatrix { data }
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix {
            data: &self.data * s,
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(SymMatrix {
            data: &self.data + &other.data,
        })
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(SymMatrix {
            data: &self.data - &other.data,
        })
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
    }

    /// `||self - other||_F / ||other||_F`, or the absolute difference when
    /// `other` is zero.
    pub fn rel_frobenius_diff(&self, other: &SymMatrix) -> Result<f64> {
        let diff = frobenius_norm(&self.sub(other)?);
        let base = frobenius_norm(other);
        Ok(if base > 0.0 { diff / base } else { diff })
    }

    /// Principal submatrix on the given indices (in the given order).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self::from_lower_fn(idx.len(), |a, b| {
            self.data[(idx[a], idx[b])]
        }))
    }

    /// Symmetric permutation: entry `(a, b)` of the result is entry
    /// `(perm[a], perm[b])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: perm.len(),
            });
        }
        self.principal_submatrix(perm)
    }

    /// `sum_ij self_ij * other_ij`, which equals `tr(self * other)` for
    /// symmetric arguments.
    pub fn frobenius_inner(&self, other: &SymMatrix) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    /// `s * self * s`, symmetrized to remove round-off asymmetry.
    pub fn congruence(&self, s: &SymMatrix) -> Result<Self> {
        self.check_same_dim(s)?;
        let prod = &s.data * &self.data * &s.data;
        Self::symmetrize(prod)
    }

    fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(())
    }
}

/// Lower Cholesky factor `L` of a positive definite matrix, `A = L L^T`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    lower: DMatrix<f64>,
    logdet: f64,
}

impl CholFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// `log det A = 2 sum_i log L_ii`.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn n(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `L y = b` in place for every column of `b`.
    pub fn forward_substitute(&self, b: &mut DMatrix<f64>) -> Result<()> {
        let n = self.n();
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.nrows(),
            });
        }
        for col in 0..b.ncols() {
            for i in 0..n {
                let mut s = b[(i, col)];
                for k in 0..i {
                    s -= self.lower[(i, k)] * b[(k, col)];
                }
                b[(i, col)] = s / self.lower[(i, i)];
            }
        }
        Ok(())
    }

    /// Solves `L^T x = y` in place for every column of `y`.
    pub fn backward_substitute(&self, y: &mut DMatrix<f64>) -> Result<()> {
        let n = self.n();
        if y.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.nrows(),
            });
        }
        for col in 0..y.ncols() {
            for i in (0..n).rev() {
                let mut s = y[(i, col)];
                for k in i + 1..n {
                    s -= self.lower[(k, i)] * y[(k, col)];
                }
                y[(i, col)] = s / self.lower[(i, i)];
            }
        }
        Ok(())
    }

    /// Solves `A X = B` for a matrix right-hand side.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut x = b.clone();
        self.forward_substitute(&mut x)?;
        self.backward_substitute(&mut x)?;
        Ok(x)
    }

    /// Solves `A x = b` for a vector right-hand side.
    pub fn solve_vector(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.forward_substitute(&mut x)?;
        self.backward_substitute(&mut x)?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }

    /// `A^{-1}`, symmetrized.
    pub fn inverse(&self) -> SymMatrix {
        let x = self
            .solve_matrix(&DMatrix::identity(self.n(), self.n()))
            .expect("identity conforms to factor");
        SymMatrix::symmetrize(x).expect("square, n >= 1")
    }
}

/// Row-oriented Cholesky–Banachiewicz factorization.
///
/// Fails with [`Error::NotPositiveDefinite`] on the first pivot that is not
/// strictly positive (or not finite).
pub fn cholesky(a: &SymMatrix) -> Result<CholFactor> {
    let n = a.n();
    let m = a.as_matrix();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut logdet = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                let d = s.sqrt();
                l[(i, i)] = d;
                logdet += 2.0 * d.ln();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(CholFactor { lower: l, logdet })
}

/// Right-hand side accepted by [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn solve(f: &CholFactor, b: &Rhs) -> Result<Rhs> {
    match b {
        Rhs::Vector(v) => f.solve_vector(v).map(Rhs::Vector),
        Rhs::Matrix(m) => f.solve_matrix(m).map(Rhs::Matrix),
    }
}

/// Inverse of a positive definite matrix via its Cholesky factor.
pub fn inverse(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(cholesky(a)?.inverse())
}

/// `sqrt(sum_ij a_ij^2)`.
pub fn frobenius_norm(a: &SymMatrix) -> f64 {
    a.as_matrix().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spectral decomposition `A = P^T diag(values) P`.
///
/// Row `k` of `vectors` is the unit eigenvector for `values[k]`. Eigenvalues
/// are sorted in descending order and every eigenvector is signed so that its
/// first non-negligible component is positive.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl EigDecomp {
    /// `P^T diag(values) P`.
    pub fn reconstruct(&self) -> SymMatrix {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        let m = self.vectors.transpose() * d * &self.vectors;
        SymMatrix::symmetrize(m).expect("square, n >= 1")
    }

    /// `sum_k log |values[k]|`.
    pub fn log_abs_det(&self) -> f64 {
        self.values.iter().map(|v| v.abs().ln()).sum()
    }

    /// Largest absolute eigenvalue (the spectral norm of a symmetric matrix).
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Symmetric eigendecomposition (Householder tridiagonalization followed by
/// implicit shifted QR), capped at `30 n` sweeps.
pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomp> {
    let n = a.n();
    let max_iter = 30 * n;
    let eig = SymmetricEigen::try_new(a.as_matrix().clone(), f64::EPSILON, max_iter)
        .ok_or(Error::ConvergenceFailure { max_iter })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[y]
            .partial_cmp(&eig.eigenvalues[x])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });

    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (row, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let scale = col.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let lead = col
            .iter()
            .copied()
            .find(|v| v.abs() > 1e-12 * scale)
            .unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            vectors[(row, j)] = sign * col[j];
        }
        values.push(eig.eigenvalues[k]);
    }
    Ok(EigDecomp { vectors, values })
}
