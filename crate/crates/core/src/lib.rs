//! Nearest-neighbor (Vecchia) approximations of Gaussian processes and exact
//! KL-divergence comparisons between the parent GP, the response NNGP and the
//! latent NNGP observed-data models.
//!
//! Module map:
//!
//! * [`numerics`]: dense symmetric linear algebra (Cholesky, solves, inverse,
//!   Frobenius norm, symmetric eigendecomposition).
//! * [`covariance`]: locations, stationary kernels and the three-point
//!   correlation parameterization.
//! * [`vecchia`]: orderings, neighbor DAGs and the Vecchia factorization.
//! * [`models`]: parent / response / latent Gaussian models.
//! * [`divergence`]: Gaussian KL divergence, the hierarchical toy example and a
//!   Monte Carlo KL oracle.
//! * [`analysis`]: error matrix, exact precision difference, leading term and
//!   the Frobenius shrinkage report.
//! * [`experiments`]: seeded drivers behind the `nngp-kl` command line tool.

pub mod analysis;
pub mod covariance;
pub mod divergence;
mod error;
pub mod experiments;
pub mod models;
pub mod numerics;
pub mod vecchia;

pub use error::{Error, Result};
