//! Orderings, nearest-neighbor DAGs and the Vecchia factorization
//! `C~^{-1} = (I - A)^T D^{-1} (I - A)`.
//!
//! All matrices handed to [`vecchia_factor`] are expressed in *ordered*
//! positions: row `i` belongs to the `i`-th point of the ordering. Use
//! [`LocationSet::reordered`] (or [`SymMatrix::permuted`]) to move a problem
//! into that frame first.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::covariance::LocationSet;
use crate::numerics::{cholesky, SymMatrix};
use crate::{Error, Result};

/// A permutation; position `k` holds the original index of the `k`-th point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    perm: Vec<usize>,
}

impl Ordering {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n {
                return Err(Error::InvalidPermutation(format!(
                    "index {p} out of range for n = {n}"
                )));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidPermutation(format!("index {p} repeated")));
            }
        }
        Ok(Ordering { perm })
    }

    pub fn identity(n: usize) -> Self {
        Ordering {
            perm: (0..n).collect(),
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderingStrategy {
    /// Sort by first coordinate, then second, then original index.
    Coordinate,
    /// Seeded uniform shuffle.
    Random(u64),
    Given(Vec<usize>),
}

pub fn build_ordering(locs: &LocationSet, strategy: &OrderingStrategy) -> Result<Ordering> {
    let n = locs.len();
    match strategy {
        OrderingStrategy::Coordinate => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.sort_by(|&a, &b| {
                let (pa, pb) = (locs.get(a).coords(), locs.get(b).coords());
                let key = |c: &[f64], k: usize| c.get(k).copied().unwrap_or(0.0);
                key(pa, 0)
                    .total_cmp(&key(pb, 0))
                    .then(key(pa, 1).total_cmp(&key(pb, 1)))
                    .then(a.cmp(&b))
            });
            Ordering::new(perm)
        }
        OrderingStrategy::Random(seed) => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            Ordering::new(perm)
        }
        OrderingStrategy::Given(perm) => {
            if perm.len() != n {
                return Err(Error::InvalidPermutation(format!(
                    "length {} does not match {n} locations",
                    perm.len()
                )));
            }
            Ordering::new(perm.clone())
        }
    }
}

/// Directed acyclic conditioning graph over ordered positions: node `i`
/// conditions on the predecessor set `N(i)`, `|N(i)| <= m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborDag {
    m: usize,
    neighbors: Vec<Vec<usize>>,
}

impl NeighborDag {
    /// Hand-built DAG. Every neighbor set must contain distinct positions
    /// strictly smaller than its node; sets are stored in ascending order and
    /// the cap `m` is the largest set size.
    pub fn from_sets(sets: Vec<Vec<usize>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidNeighbors("empty DAG".into()));
        }
        let mut neighbors = Vec::with_capacity(sets.len());
        for (i, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            if let Some(&bad) = set.iter().find(|&&j| j >= i) {
                return Err(Error::InvalidNeighbors(format!(
                    "node {i} lists non-predecessor {bad}"
                )));
            }
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidNeighbors(format!(
                    "node {i} lists a neighbor twice"
                )));
            }
            neighbors.push(set);
        }
        let m = neighbors.iter().map(Vec::len).max().unwrap_or(0);
        Ok(NeighborDag { m, neighbors })
    }

    /// Every node conditions on all of its predecessors.
    pub fn saturated(n: usize) -> Self {
        NeighborDag {
            m: n.saturating_sub(1),
            neighbors: (0..n).map(|i| (0..i).collect()).collect(),
        }
    }

    /// No conditioning at all (independence approximation).
    pub fn empty(n: usize) -> Self {
        NeighborDag {
            m: 0,
            neighbors: vec![Vec::new(); n],
        }
    }

    /// `N(i) = {i - 1}`.
    pub fn chain(n: usize) -> Self {
        NeighborDag {
            m: usize::from(n > 1),
            neighbors: (0..n)
                .map(|i| if i == 0 { Vec::new() } else { vec![i - 1] })
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_saturated(&self) -> bool {
        self.neighbors.iter().enumerate().all(|(i, s)| s.len() == i)
    }
}

/// `N(i)` = the `min(i, m)` predecessors (in `ord`) closest to point `i` in
/// Euclidean distance; ties go to the smaller ordered position.
pub fn build_neighbor_dag(locs: &LocationSet, ord: &Ordering, m: usize) -> Result<NeighborDag> {
    let n = locs.len();
    if ord.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ord.len(),
        });
    }
    let perm = ord.perm();
    let mut neighbors = Vec::with_capacity(n);
    for i in 0..n {
        let here = locs.get(perm[i]);
        let mut cand: Vec<(f64, usize)> = (0..i)
            .map(|j| (here.distance(locs.get(perm[j])), j))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut set: Vec<usize> = cand.into_iter().take(m).map(|(_, j)| j).collect();
        set.sort_unstable();
        neighbors.push(set);
    }
    Ok(NeighborDag { m, neighbors })
}

/// Sparse-by-construction factor: `a` is strictly lower triangular with row
/// `i` supported on `N(i)`, `d` holds the conditional variances.
#[derive(Debug, Clone)]
pub struct VecchiaFactor {
    a: DMatrix<f64>,
    d: Vec<f64>,
}

impl VecchiaFactor {
    pub fn new(a: DMatrix<f64>, d: Vec<f64>) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.nrows(),
            });
        }
        for i in 0..n {
            for j in i..n {
                if a[(i, j)] != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "factor entry ({i}, {j}) is not strictly lower triangular"
                    )));
                }
            }
        }
        if let Some((i, &v)) = d.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NotPositiveDefinite { index: i, pivot: v });
        }
        Ok(VecchiaFactor { a, d })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }
}

/// Row-wise Vecchia factorization of `c` under `dag`:
/// `a[i, N(i)] = c[i, N(i)] c[N(i), N(i)]^{-1}` and
/// `d[i] = c[i, i] - a[i, N(i)] c[N(i), i]`.
pub fn vecchia_factor(c: &SymMatrix, dag: &NeighborDag) -> Result<VecchiaFactor> {
    let n = c.n();
    if dag.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: dag.n(),
        });
    }
    let mut a = DMatrix::zeros(n, n);
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let idx = dag.neighbors(i);
        if idx.is_empty() {
            d.push(c.get(i, i));
            continue;
        }
        let sub = c.principal_submatrix(idx)?;
        let chol = cholesky(&sub).map_err(|e| e.context(format!("neighbor block of row {i}")))?;
        let rhs = DMatrix::from_fn(idx.len(), 1, |k, _| c.get(idx[k], i));
        let w = chol.solve_matrix(&rhs)?;
        let mut cond = c.get(i, i);
        for (k, &j) in idx.iter().enumerate() {
            a[(i, j)] = w[(k, 0)];
            cond -= w[(k, 0)] * rhs[(k, 0)];
        }
        if !(cond > 0.0) {
            return Err(Error::NotPositiveDefinite {
                index: i,
                pivot: cond,
            });
        }
        d.push(cond);
    }
    Ok(VecchiaFactor { a, d })
}

/// `(I - A)^T diag(d)^{-1} (I - A)`.
pub fn precision_from_factor(f: &VecchiaFactor) -> SymMatrix {
    let n = f.n();
    let unit = |i: usize, j: usize| if i == j { 1.0 } else { -f.a[(i, j)] };
    let scaled = DMatrix::from_fn(n, n, |i, j| unit(i, j) / f.d[i]);
    let lower = DMatrix::from_fn(n, n, unit);
    SymMatrix::symmetrize(lower.transpose() * scaled).expect("square, n >= 1")
}

/// `(I - A)^{-1} diag(d) (I - A)^{-T}`, the covariance implied by the factor.
pub fn cov_from_factor(f: &VecchiaFactor) -> SymMatrix {
    let n = f.n();
    // X = (I - A)^{-1} by forward substitution on the unit lower-triangular
    // I - A.
    let mut x = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        x[(col, col)] = 1.0;
        for i in col + 1..n {
            let mut s = 0.0;
            for k in col..i {
                let aik = f.a[(i, k)];
                if aik != 0.0 {
                    s += aik * x[(k, col)];
                }
            }
            x[(i, col)] = s;
        }
    }
    let xd = DMatrix::from_fn(n, n, |i, j| x[(i, j)] * f.d[j]);
    SymMatrix::symmetrize(xd * x.transpose()).expect("square, n >= 1")
}
