//! Error shrinkage of the latent model.
//!
//! With `E = C^{-1} - C~^{-1}` the Vecchia error of the latent precision, the
//! collapsed-space precision difference
//! `Delta = (C + tau2 I)^{-1} - (C~ + tau2 I)^{-1}` has leading term
//! `B = S E S`, `S = (I + tau2 C~^{-1})^{-1}`. Every eigenvalue of `S` lies
//! in `(0, 1]`, so `||B||_F <= ||E||_F`, with equality only when `tau2 = 0`.

use nalgebra::DMatrix;

use crate::numerics::{cholesky, frobenius_norm, inverse, sym_eig, SymMatrix};
use crate::vecchia::{cov_from_factor, precision_from_factor, vecchia_factor, NeighborDag};
use crate::{Error, Result};

fn check_tau2(tau2: f64) -> Result<()> {
    if !(tau2 >= 0.0 && tau2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tau2 must be non-negative, got {tau2}"
        )));
    }
    Ok(())
}

/// `C^{-1} - Vecchia(C^{-1})`.
pub fn error_matrix(c: &SymMatrix, dag: &NeighborDag) -> Result<SymMatrix> {
    let q_tilde = precision_from_factor(&vecchia_factor(c, dag)?);
    inverse(c)?.sub(&q_tilde)
}

/// `B = (I + tau2 Q~)^{-1} E (I + tau2 Q~)^{-1}` with `Q~ = C~^{-1}`.
///
/// Uses two Cholesky solves against `I + tau2 Q~` instead of forming the
/// inverse. `tau2 = 0` returns `E` unchanged.
pub fn leading_term(c_tilde_prec: &SymMatrix, tau2: f64, e: &SymMatrix) -> Result<SymMatrix> {
    check_tau2(tau2)?;
    if e.n() != c_tilde_prec.n() {
        return Err(Error::DimensionMismatch {
            expected: c_tilde_prec.n(),
            found: e.n(),
        });
    }
    if tau2 == 0.0 {
        return Ok(e.clone());
    }
    let shrink = cholesky(&SymMatrix::identity(e.n()).add(&c_tilde_prec.scale(tau2))?)?;
    // Y = A^{-1} E, then B = (A^{-1} Y^T)^T
    let y = shrink.solve_matrix(e.as_matrix())?;
    let b = shrink.solve_matrix(&y.transpose())?;
    SymMatrix::symmetrize(b.transpose())
}

/// Max-entry deviation between `I - Q~ (Q~ + I / tau2)^{-1}` and
/// `(I + tau2 Q~)^{-1}`; both are the same matrix in exact arithmetic.
pub fn spectral_identity_check(c_tilde_prec: &SymMatrix, tau2: f64) -> Result<f64> {
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tau2 must be positive, got {tau2}"
        )));
    }
    let n = c_tilde_prec.n();
    let m_star = c_tilde_prec.add_diagonal(1.0 / tau2);
    let m_star_inv = inverse(&m_star)?;
    let lhs = DMatrix::identity(n, n) - c_tilde_prec.as_matrix() * m_star_inv.as_matrix();
    let rhs = inverse(&SymMatrix::identity(n).add(&c_tilde_prec.scale(tau2))?)?;
    Ok(lhs
        .iter()
        .zip(rhs.as_matrix().iter())
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
}

/// `(C + tau2 I)^{-1} - (C~ + tau2 I)^{-1}`.
pub fn exact_difference(c: &SymMatrix, tau2: f64, dag: &NeighborDag) -> Result<SymMatrix> {
    check_tau2(tau2)?;
    let c_tilde = cov_from_factor(&vecchia_factor(c, dag)?);
    inverse(&c.add_diagonal(tau2))?.sub(&inverse(&c_tilde.add_diagonal(tau2))?)
}

/// All matrices of the shrinkage decomposition for one configuration.
///
/// `m_true = C^{-1} + I / tau2` and `m_star = C~^{-1} + I / tau2` are only
/// defined for `tau2 > 0`.
#[derive(Debug, Clone)]
pub struct ShrinkageIntermediates {
    pub c_tilde_prec: SymMatrix,
    pub e: SymMatrix,
    pub m_true: Option<SymMatrix>,
    pub m_star: Option<SymMatrix>,
    pub b: SymMatrix,
    pub delta: SymMatrix,
    /// `K^{-1} - Vecchia(K^{-1})`, the response model's precision error.
    pub k_error: SymMatrix,
}

impl ShrinkageIntermediates {
    pub fn compute(c: &SymMatrix, tau2: f64, dag: &NeighborDag) -> Result<Self> {
        check_tau2(tau2)?;
        let c_inv = inverse(c)?;
        let factor = vecchia_factor(c, dag)?;
        let c_tilde_prec = precision_from_factor(&factor);
        let c_tilde = cov_from_factor(&factor);
        let e = c_inv.sub(&c_tilde_prec)?;
        let b = leading_term(&c_tilde_prec, tau2, &e)?;

        let k = c.add_diagonal(tau2);
        let k_inv = inverse(&k)?;
        let delta = k_inv.sub(&inverse(&c_tilde.add_diagonal(tau2))?)?;
        let k_error = k_inv.sub(&precision_from_factor(&vecchia_factor(&k, dag)?))?;

        let (m_true, m_star) = if tau2 > 0.0 {
            (
                Some(c_inv.add_diagonal(1.0 / tau2)),
                Some(c_tilde_prec.add_diagonal(1.0 / tau2)),
            )
        } else {
            (None, None)
        };
        Ok(ShrinkageIntermediates {
            c_tilde_prec,
            e,
            m_true,
            m_star,
            b,
            delta,
            k_error,
        })
    }

    /// `(log |det E|, log |det B|)` from the eigenvalues.
    pub fn log_abs_dets(&self) -> Result<(f64, f64)> {
        Ok((
            sym_eig(&self.e)?.log_abs_det(),
            sym_eig(&self.b)?.log_abs_det(),
        ))
    }

    /// Whether `|det B| <= |det E|`; `None` when `|det E| < 1e-300`, where the
    /// comparison is meaningless.
    pub fn determinant_shrinks(&self) -> Result<Option<bool>> {
        let (log_e, log_b) = self.log_abs_dets()?;
        if !(log_e >= 1e-300_f64.ln()) {
            return Ok(None);
        }
        let slack = 1e-9 * (1.0 + log_e.abs());
        Ok(Some(log_b <= log_e + slack))
    }
}

/// Norms and ratios of one shrinkage configuration.
///
/// When `||E||_F = 0` both ratios are undefined; `ratio_shrink` is reported as
/// 1 and `ratio_remainder` as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageReport {
    pub norm_e: f64,
    pub norm_b: f64,
    pub norm_delta: f64,
    pub norm_remainder: f64,
    pub ratio_shrink: f64,
    pub ratio_remainder: f64,
    pub bound_holds: bool,
    pub norm_k_error: f64,
    /// Spectral norms, reported but not asserted.
    pub norm2_e: f64,
    pub norm2_b: f64,
}

impl ShrinkageReport {
    pub fn from_intermediates(inter: &ShrinkageIntermediates) -> Result<Self> {
        let norm_e = frobenius_norm(&inter.e);
        let norm_b = frobenius_norm(&inter.b);
        let norm_delta = frobenius_norm(&inter.delta);
        let norm_remainder = frobenius_norm(&inter.delta.sub(&inter.b)?);
        let (ratio_shrink, ratio_remainder) = if norm_e > 0.0 {
            (norm_b / norm_e, norm_remainder / (norm_e * norm_e))
        } else {
            (1.0, 0.0)
        };
        Ok(ShrinkageReport {
            norm_e,
            norm_b,
            norm_delta,
            norm_remainder,
            ratio_shrink,
            ratio_remainder,
            bound_holds: norm_b <= norm_e * (1.0 + 1e-12),
            norm_k_error: frobenius_norm(&inter.k_error),
            norm2_e: sym_eig(&inter.e)?.spectral_radius(),
            norm2_b: sym_eig(&inter.b)?.spectral_radius(),
        })
    }
}

pub fn shrinkage_report(c: &SymMatrix, tau2: f64, dag: &NeighborDag) -> Result<ShrinkageReport> {
    ShrinkageReport::from_intermediates(&ShrinkageIntermediates::compute(c, tau2, dag)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{
        cov_matrix, three_point_corr_matrix, KernelFamily, KernelSpec, LocationSet,
        ThreePointCorr,
    };
    use crate::vecchia::{build_neighbor_dag, build_ordering, OrderingStrategy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, n: usize, m: usize) -> (SymMatrix, NeighborDag) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locs = LocationSet::uniform_unit_square(n, &mut rng).unwrap();
        let ord = build_ordering(&locs, &OrderingStrategy::Coordinate).unwrap();
        let dag = build_neighbor_dag(&locs, &ord, m).unwrap();
        let k = KernelSpec::new(KernelFamily::Exponential, 1.0, 0.3).unwrap();
        (cov_matrix(&k, &locs.reordered(ord.perm()).unwrap()), dag)
    }

    #[test]
    fn error_matrix_examples() {
        let (c, _) = problem(1, 15, 3);
        let e = error_matrix(&c, &NeighborDag::saturated(15)).unwrap();
        assert!(frobenius_norm(&e) < 1e-9);

        let e = error_matrix(&SymMatrix::identity(4), &NeighborDag::empty(4)).unwrap();
        assert_eq!(e, SymMatrix::zeros(4));

        // rho13 = rho12 rho23 makes the chain exact
        let r = three_point_corr_matrix(&ThreePointCorr::new(0.5, 0.25, 0.5).unwrap()).unwrap();
        let e = error_matrix(&r, &NeighborDag::chain(3)).unwrap();
        assert!(e.max_abs_diff(&SymMatrix::zeros(3)).unwrap() < 1e-10);
    }

    #[test]
    fn leading_term_examples() {
        let (c, dag) = problem(2, 12, 2);
        let q = precision_from_factor(&vecchia_factor(&c, &dag).unwrap());
        let e = error_matrix(&c, &dag).unwrap();
        assert_eq!(leading_term(&q, 0.0, &e).unwrap(), e);
        assert_eq!(
            leading_term(&q, 0.7, &SymMatrix::zeros(12)).unwrap(),
            SymMatrix::zeros(12)
        );
        let b = leading_term(&SymMatrix::identity(3), 1.0, &SymMatrix::identity(3)).unwrap();
        assert!(b.max_abs_diff(&SymMatrix::identity(3).scale(0.25)).unwrap() < 1e-15);
        assert!(leading_term(&q, -1.0, &e).is_err());
    }

    #[test]
    fn leading_term_matches_explicit_inverse() {
        let (c, dag) = problem(3, 20, 3);
        let q = precision_from_factor(&vecchia_factor(&c, &dag).unwrap());
        let e = error_matrix(&c, &dag).unwrap();
        let tau2 = 0.4;
        let s = inverse(&SymMatrix::identity(20).add(&q.scale(tau2)).unwrap()).unwrap();
        let explicit = e.congruence(&s).unwrap();
        let b = leading_term(&q, tau2, &e).unwrap();
        assert!(b.rel_frobenius_diff(&explicit).unwrap() < 1e-10);
    }

    #[test]
    fn spectral_identity_examples() {
        assert!(spectral_identity_check(&SymMatrix::identity(3), 1.0).unwrap() < 1e-12);
        let d = SymMatrix::diagonal(&[1.0, 2.0]).unwrap();
        assert!(spectral_identity_check(&d, 0.5).unwrap() < 1e-12);
        for seed in 0..5 {
            let (c, dag) = problem(10 + seed, 25, 2);
            let q = precision_from_factor(&vecchia_factor(&c, &dag).unwrap());
            assert!(spectral_identity_check(&q, 0.3).unwrap() < 1e-9);
        }
        assert!(spectral_identity_check(&d, 0.0).is_err());
    }

    #[test]
    fn exact_difference_examples() {
        let (c, dag) = problem(4, 15, 2);
        let d = exact_difference(&c, 0.5, &NeighborDag::saturated(15)).unwrap();
        assert!(frobenius_norm(&d) < 1e-9);
        let d0 = exact_difference(&c, 0.0, &dag).unwrap();
        let e = error_matrix(&c, &dag).unwrap();
        assert!(d0.max_abs_diff(&e).unwrap() < 1e-10 * (1.0 + frobenius_norm(&e)));
    }

    #[test]
    fn report_examples() {
        let (c, dag) = problem(5, 20, 2);
        let r = shrinkage_report(&c, 0.0, &dag).unwrap();
        assert_eq!(r.ratio_shrink, 1.0);
        assert!(r.bound_holds);

        let r = shrinkage_report(&c, 0.5, &NeighborDag::saturated(20)).unwrap();
        assert!(r.norm_e < 1e-9 && r.norm_b < 1e-9 && r.norm_delta < 1e-9);
        assert!(r.bound_holds);

        let r = shrinkage_report(&c, 0.5, &dag).unwrap();
        assert!(r.ratio_shrink < 1.0 && r.bound_holds);
        assert!(r.norm2_b <= r.norm2_e);
    }

    #[test]
    fn shrinkage_is_monotone_in_noise() {
        let (c, dag) = problem(6, 30, 3);
        let mut prev = f64::INFINITY;
        for tau2 in [0.0, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0] {
            let r = shrinkage_report(&c, tau2, &dag).unwrap();
            assert!(r.ratio_shrink <= prev * (1.0 + 1e-12), "tau2={tau2}");
            prev = r.ratio_shrink;
        }
    }

    #[test]
    fn determinant_corollary_small_instances() {
        let mut checked = 0;
        for seed in 0..10 {
            let (c, dag) = problem(20 + seed, 6, 1);
            let inter = ShrinkageIntermediates::compute(&c, 0.3, &dag).unwrap();
            if let Some(ok) = inter.determinant_shrinks().unwrap() {
                assert!(ok, "seed {seed}");
                checked += 1;
            }
        }
        assert!(checked > 0);
        let e = SymMatrix::from_rows(&[&[1.0, 0.2], &[0.2, -0.5]]).unwrap();
        let q = SymMatrix::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let b = leading_term(&q, 0.8, &e).unwrap();
        let det = |m: &SymMatrix| m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
        assert!(det(&b).abs() < det(&e).abs());
    }
}
