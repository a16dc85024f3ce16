//! Observed-data Gaussian models: the parent GP (`C + tau2 I`), the response
//! NNGP (Vecchia applied to `K = C + tau2 I`) and the latent NNGP (Vecchia
//! applied to `C`, nugget added afterwards).

use nalgebra::DVector;

use crate::covariance::{three_point_corr_matrix, ThreePointCorr};
use crate::numerics::{cholesky, CholFactor, SymMatrix};
use crate::vecchia::{cov_from_factor, precision_from_factor, vecchia_factor, NeighborDag};
use crate::{Error, Result};

/// Which matrix a [`GaussianModel`] stores.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelShape {
    Covariance(SymMatrix),
    Precision(SymMatrix),
}

impl ModelShape {
    pub fn matrix(&self) -> &SymMatrix {
        match self {
            ModelShape::Covariance(m) | ModelShape::Precision(m) => m,
        }
    }
}

/// Multivariate normal in either covariance or precision form. The Cholesky
/// factor of the stored matrix is computed once on construction.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: DVector<f64>,
    shape: ModelShape,
    factor: CholFactor,
    logdet_cov: f64,
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, shape: ModelShape) -> Result<Self> {
        let n = shape.matrix().n();
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mean.len(),
            });
        }
        let factor = cholesky(shape.matrix())?;
        let logdet_cov = match shape {
            ModelShape::Covariance(_) => factor.logdet(),
            ModelShape::Precision(_) => -factor.logdet(),
        };
        Ok(GaussianModel {
            mean,
            shape,
            factor,
            logdet_cov,
        })
    }

    pub fn from_covariance(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        Self::new(mean, ModelShape::Covariance(cov))
    }

    pub fn from_precision(mean: DVector<f64>, prec: SymMatrix) -> Result<Self> {
        Self::new(mean, ModelShape::Precision(prec))
    }

    pub fn zero_mean_covariance(cov: SymMatrix) -> Result<Self> {
        Self::from_covariance(DVector::zeros(cov.n()), cov)
    }

    pub fn zero_mean_precision(prec: SymMatrix) -> Result<Self> {
        Self::from_precision(DVector::zeros(prec.n()), prec)
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    /// Cholesky factor of the *stored* matrix.
    pub fn factor(&self) -> &CholFactor {
        &self.factor
    }

    /// `log det Sigma`, whichever form is stored.
    pub fn logdet_cov(&self) -> f64 {
        self.logdet_cov
    }

    /// Covariance matrix, inverting the precision when necessary.
    pub fn covariance(&self) -> SymMatrix {
        match &self.shape {
            ModelShape::Covariance(c) => c.clone(),
            ModelShape::Precision(_) => self.factor.inverse(),
        }
    }

    /// Precision matrix, inverting the covariance when necessary.
    pub fn precision(&self) -> SymMatrix {
        match &self.shape {
            ModelShape::Covariance(_) => self.factor.inverse(),
            ModelShape::Precision(q) => q.clone(),
        }
    }

    /// `(x - mu)^T Sigma^{-1} (x - mu)`.
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: x.len(),
            });
        }
        let r = x - &self.mean;
        Ok(match &self.shape {
            ModelShape::Covariance(_) => {
                let mut z = nalgebra::DMatrix::from_column_slice(r.len(), 1, r.as_slice());
                self.factor.forward_substitute(&mut z)?;
                z.norm_squared()
            }
            ModelShape::Precision(q) => r.dot(&(q.as_matrix() * &r)),
        })
    }

    /// Log density at `x` in nats.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        let q = self.mahalanobis_sq(x)?;
        let n = self.n() as f64;
        Ok(-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.logdet_cov + q))
    }
}

/// Parent, response-NNGP and latent-NNGP models for one configuration.
#[derive(Debug, Clone)]
pub struct ModelTriple {
    pub parent: GaussianModel,
    pub response: GaussianModel,
    pub latent: GaussianModel,
}

impl ModelTriple {
    pub fn build(c: &SymMatrix, tau2: f64, dag: &NeighborDag) -> Result<Self> {
        Ok(ModelTriple {
            parent: parent_model(c, tau2)?,
            response: response_model(c, tau2, dag)?,
            latent: latent_model(c, tau2, dag)?,
        })
    }
}

fn check_tau2(tau2: f64) -> Result<()> {
    if !(tau2 >= 0.0 && tau2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tau2 must be non-negative, got {tau2}"
        )));
    }
    Ok(())
}

/// Zero-mean model with covariance `C + tau2 I`.
pub fn parent_model(c: &SymMatrix, tau2: f64) -> Result<GaussianModel> {
    check_tau2(tau2)?;
    GaussianModel::zero_mean_covariance(c.add_diagonal(tau2))
}

/// Zero-mean model with precision `Vecchia((C + tau2 I)^{-1})`, kept in
/// precision form.
pub fn response_model(c: &SymMatrix, tau2: f64, dag: &NeighborDag) -> Result<GaussianModel> {
    check_tau2(tau2)?;
    let k = c.add_diagonal(tau2);
    let q = precision_from_factor(&vecchia_factor(&k, dag)?);
    GaussianModel::zero_mean_precision(q)
}

/// Zero-mean model with covariance `C~ + tau2 I`, `C~^{-1} = Vecchia(C^{-1})`.
pub fn latent_model(c: &SymMatrix, tau2: f64, dag: &NeighborDag) -> Result<GaussianModel> {
    check_tau2(tau2)?;
    let c_tilde = cov_from_factor(&vecchia_factor(c, dag)?);
    GaussianModel::zero_mean_covariance(c_tilde.add_diagonal(tau2))
}

/// Closed-form observed-data covariances of the response and latent models
/// for three sites under the chain DAG `N(1) = {0}`, `N(2) = {1}`.
///
/// Both share diagonal `sigma2 (1 + delta2)` and the adjacent entries
/// `sigma2 rho12`, `sigma2 rho23`; they differ only in the `(0, 2)` entry,
/// `sigma2 rho12 rho23 / (1 + delta2)` for the response model against
/// `sigma2 rho12 rho23` for the latent model.
pub fn three_point_closed_forms(
    sigma2: f64,
    delta2: f64,
    c: &ThreePointCorr,
) -> Result<(SymMatrix, SymMatrix)> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    if !(delta2 >= 0.0 && delta2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta2 must be non-negative, got {delta2}"
        )));
    }
    // revalidates the correlation triple
    three_point_corr_matrix(c)?;
    let diag = 1.0 + delta2;
    let (r12, r23) = (c.rho12(), c.rho23());
    let build = |corner: f64| {
        SymMatrix::from_rows(&[
            &[diag, r12, corner],
            &[r12, diag, r23],
            &[corner, r23, diag],
        ])
        .map(|m| m.scale(sigma2))
    };
    Ok((build(r12 * r23 / diag)?, build(r12 * r23)?))
}
