//! Gaussian KL divergence, the two-level hierarchical toy comparison on the
//! joint and collapsed spaces, and a Monte Carlo KL estimator used as a test
//! oracle.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::models::{GaussianModel, ModelShape};
use crate::numerics::{cholesky, SymMatrix};
use crate::{Error, Result};

/// `KL(P || Q)` in nats between two multivariate normals.
///
/// Computed as
/// `1/2 {tr(S_Q^{-1} S_P) + (m_P - m_Q)^T S_Q^{-1} (m_P - m_Q) - N + log det S_Q - log det S_P}`,
/// which is the usual `-1/2 {log det S_P - log det S_Q + N - tr(..) - (..)}`
/// with the leading minus sign distributed over the braces.
///
/// When `q` is stored as a precision `Q`, the trace is `tr(Q S_P)` and
/// `log det S_Q = -log det Q`; `Q` is never inverted.
pub fn kl_gaussian(p: &GaussianModel, q: &GaussianModel) -> Result<f64> {
    let n = p.n();
    if q.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: q.n(),
        });
    }
    let trace = match q.shape() {
        ModelShape::Covariance(_) => {
            // tr(S_Q^{-1} S_P) = ||L_Q^{-1} L_P||_F^2
            let mut y: DMatrix<f64> = match p.shape() {
                ModelShape::Covariance(_) => p.factor().lower().clone(),
                ModelShape::Precision(_) => cholesky(&p.covariance())?.lower().clone(),
            };
            q.factor().forward_substitute(&mut y)?;
            y.norm_squared()
        }
        ModelShape::Precision(prec) => prec.frobenius_inner(&p.covariance())?,
    };
    let maha = q.mahalanobis_sq(p.mean())?;
    Ok(0.5 * (trace + maha - n as f64 + q.logdet_cov() - p.logdet_cov()))
}

/// Which of two candidate models is closer (smaller KL) to the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Closer {
    #[serde(rename = "Q1_closer")]
    Q1,
    #[serde(rename = "Q2_closer")]
    Q2,
    #[serde(rename = "tie")]
    Tie,
}

impl Closer {
    pub const TIE_TOLERANCE: f64 = 1e-12;

    pub fn compare(kl_q1: f64, kl_q2: f64) -> Self {
        if (kl_q1 - kl_q2).abs() < Self::TIE_TOLERANCE {
            Closer::Tie
        } else if kl_q1 < kl_q2 {
            Closer::Q1
        } else {
            Closer::Q2
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Closer::Q1 => "Q1_closer",
            Closer::Q2 => "Q2_closer",
            Closer::Tie => "tie",
        }
    }
}

/// `y | w ~ N(w, cond_var)`, `w ~ N(0, latent_var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hierarchical {
    pub cond_var: f64,
    pub latent_var: f64,
}

impl Hierarchical {
    pub const fn new(cond_var: f64, latent_var: f64) -> Self {
        Hierarchical {
            cond_var,
            latent_var,
        }
    }

    /// Covariance of `(y, w)`: `[[u + v, u], [u, u]]`.
    pub fn joint_covariance(&self) -> SymMatrix {
        let (u, v) = (self.latent_var, self.cond_var);
        SymMatrix::from_lower_fn(2, |i, j| match (i, j) {
            (0, 0) => u + v,
            _ => u,
        })
    }

    /// Variance of `y` after integrating out `w`.
    pub fn marginal_variance(&self) -> f64 {
        self.latent_var + self.cond_var
    }

    pub fn joint_model(&self) -> Result<GaussianModel> {
        GaussianModel::zero_mean_covariance(self.joint_covariance())
    }

    pub fn marginal_model(&self) -> Result<GaussianModel> {
        GaussianModel::zero_mean_covariance(SymMatrix::diagonal(&[self.marginal_variance()])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyVariant {
    One,
    Two,
}

impl ToyVariant {
    pub const TRUTH: Hierarchical = Hierarchical::new(1.0, 1.0);

    /// The two candidate models `(Q1, Q2)`.
    pub fn candidates(self) -> (Hierarchical, Hierarchical) {
        let q1 = Hierarchical::new(0.5, 0.5);
        match self {
            ToyVariant::One => (q1, Hierarchical::new(2.5, 0.5)),
            ToyVariant::Two => (q1, Hierarchical::new(1.5, 1.5)),
        }
    }
}

/// KL values of both candidates on the joint `(y, w)` space and the collapsed
/// `y` space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlReport {
    #[serde(serialize_with = "crate::experiments::ser_f64")]
    pub kl_joint_q1: f64,
    #[serde(serialize_with = "crate::experiments::ser_f64")]
    pub kl_joint_q2: f64,
    #[serde(serialize_with = "crate::experiments::ser_f64")]
    pub kl_marginal_q1: f64,
    #[serde(serialize_with = "crate::experiments::ser_f64")]
    pub kl_marginal_q2: f64,
    pub joint_order: Closer,
    pub marginal_order: Closer,
}

pub fn compare_hierarchical(
    truth: &Hierarchical,
    q1: &Hierarchical,
    q2: &Hierarchical,
) -> Result<KlReport> {
    let pj = truth.joint_model()?;
    let pm = truth.marginal_model()?;
    let kl_joint_q1 = kl_gaussian(&pj, &q1.joint_model()?)?;
    let kl_joint_q2 = kl_gaussian(&pj, &q2.joint_model()?)?;
    let kl_marginal_q1 = kl_gaussian(&pm, &q1.marginal_model()?)?;
    let kl_marginal_q2 = kl_gaussian(&pm, &q2.marginal_model()?)?;
    Ok(KlReport {
        kl_joint_q1,
        kl_joint_q2,
        kl_marginal_q1,
        kl_marginal_q2,
        joint_order: Closer::compare(kl_joint_q1, kl_joint_q2),
        marginal_order: Closer::compare(kl_marginal_q1, kl_marginal_q2),
    })
}

/// Truth `y | w ~ N(w, 1)`, `w ~ N(0, 1)` against the variant's two
/// candidates.
pub fn toy_example(variant: ToyVariant) -> KlReport {
    let (q1, q2) = variant.candidates();
    compare_hierarchical(&ToyVariant::TRUTH, &q1, &q2)
        .expect("toy covariances are positive definite")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of `KL(P || Q) = E_P[log p(x) - log q(x)]`.
///
/// Draws `x = mu_P + L_P z` with `z` standard normal from a ChaCha8 stream
/// seeded by `seed`.
pub fn mc_kl_estimate(
    p: &GaussianModel,
    q: &GaussianModel,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "at least 1000 samples required, got {samples}"
        )));
    }
    let n = p.n();
    if q.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: q.n(),
        });
    }
    let lp = cholesky(&p.covariance())?;
    let lower = lp.lower();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DVector::zeros(n);

    // Welford running mean / variance
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let x = p.mean() + lower * &z;
        let v = p.log_density(&x)? - q.log_density(&x)?;
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(McEstimate {
        estimate: mean,
        stderr: (var / samples as f64).sqrt(),
    })
}
