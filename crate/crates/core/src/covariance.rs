//! Spatial locations, stationary isotropic kernels and the three-point
//! correlation parameterization.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::numerics::SymMatrix;
use crate::{Error, Result};

/// A point in `R^d`, `d` in `{1, 2, 3}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    coords: Vec<f64>,
}

impl Location {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() > 3 {
            return Err(Error::InvalidLocations(format!(
                "dimension must be 1, 2 or 3, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidLocations(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        Ok(Location { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, other: &Location) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Ordered, non-empty set of pairwise-distinct locations of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSet {
    points: Vec<Location>,
}

impl LocationSet {
    pub fn new(points: Vec<Location>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidLocations("empty location set".into()));
        };
        let d = first.dim();
        if let Some(p) = points.iter().find(|p| p.dim() != d) {
            return Err(Error::InvalidLocations(format!(
                "mixed dimensions {d} and {}",
                p.dim()
            )));
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::InvalidLocations(format!(
                        "duplicate location {:?} at rows {j} and {i}",
                        points[i].coords
                    )));
                }
            }
        }
        Ok(LocationSet { points })
    }

    /// Convenience constructor from raw coordinate rows.
    pub fn from_coords(rows: &[&[f64]]) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| Location::new(r.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    /// `n` points drawn uniformly on `[0, 1]^2`.
    pub fn uniform_unit_square<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let points = (0..n)
            .map(|_| Location::new(vec![rng.random::<f64>(), rng.random::<f64>()]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    /// Reads a location CSV: a header row, then one row per point with
    /// columns `x1..xd`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::InvalidLocations(e.to_string()))?
            .clone();
        let d = headers.len();
        for (k, h) in headers.iter().enumerate() {
            if h != format!("x{}", k + 1) {
                return Err(Error::InvalidLocations(format!(
                    "expected header column x{}, found {h:?}",
                    k + 1
                )));
            }
        }
        let mut points = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidLocations(e.to_string()))?;
            if record.len() != d {
                return Err(Error::InvalidLocations(format!(
                    "row {} has {} columns, header has {d}",
                    row + 1,
                    record.len()
                )));
            }
            let coords = record
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| {
                        Error::InvalidLocations(format!("row {}: {f:?}: {e}", row + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(Location::new(coords)?);
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::InvalidLocations(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[Location] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &Location {
        &self.points[i]
    }

    /// The same points listed in the order `perm` (position `k` holds point
    /// `perm[k]`).
    pub fn reordered(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: perm.len(),
            });
        }
        Ok(LocationSet {
            points: perm.iter().map(|&k| self.points[k].clone()).collect(),
        })
    }
}

/// Pairwise Euclidean distances.
pub fn distance_matrix(locs: &LocationSet) -> SymMatrix {
    SymMatrix::from_lower_fn(locs.len(), |i, j| {
        if i == j {
            0.0
        } else {
            locs.get(i).distance(locs.get(j))
        }
    })
}

/// Correlation family. The Matérn smoothness is fixed by the variant:
/// exponential is `nu = 1/2`, `Matern32` is `3/2`, `Matern52` is `5/2` and
/// gaussian is the `nu -> infinity` limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Exponential,
    Matern32,
    Matern52,
    Gaussian,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Exponential,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
        KernelFamily::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exponential",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Gaussian => "gaussian",
        }
    }

    /// Correlation at distance `d` for range `phi`.
    pub fn correlation(self, d: f64, phi: f64) -> f64 {
        let r = d / phi;
        match self {
            KernelFamily::Exponential => (-r).exp(),
            KernelFamily::Matern32 => {
                let s = 3.0_f64.sqrt() * r;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = 5.0_f64.sqrt() * r;
                (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
            }
            KernelFamily::Gaussian => (-r * r).exp(),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown kernel family {s:?}")))
    }
}

/// Stationary covariance `sigma2 * rho(d / phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    sigma2: f64,
    phi: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma2: f64, phi: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "phi must be positive, got {phi}"
            )));
        }
        Ok(KernelSpec {
            family,
            sigma2,
            phi,
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn covariance(&self, d: f64) -> f64 {
        self.sigma2 * self.family.correlation(d, self.phi)
    }
}

/// Nugget variance and its noise-to-signal ratio relative to a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    tau2: f64,
    delta2: f64,
}

impl NoiseSpec {
    pub fn new(tau2: f64, kernel: &KernelSpec) -> Result<Self> {
        if !(tau2 >= 0.0 && tau2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau2 must be non-negative, got {tau2}"
            )));
        }
        Ok(NoiseSpec {
            tau2,
            delta2: tau2 / kernel.sigma2(),
        })
    }

    /// Noise given as a ratio to the kernel's marginal variance.
    pub fn from_ratio(delta2: f64, kernel: &KernelSpec) -> Result<Self> {
        Self::new(delta2 * kernel.sigma2(), kernel)
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }
}

/// `C_ij = sigma2 * rho(|s_i - s_j|)`.
pub fn cov_matrix(kernel: &KernelSpec, locs: &LocationSet) -> SymMatrix {
    SymMatrix::from_lower_fn(locs.len(), |i, j| {
        if i == j {
            kernel.sigma2()
        } else {
            kernel.covariance(locs.get(i).distance(locs.get(j)))
        }
    })
}

/// Pairwise correlations of three sites, valid only if the resulting
/// correlation matrix is positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePointCorr {
    rho12: f64,
    rho13: f64,
    rho23: f64,
}

impl ThreePointCorr {
    pub fn new(rho12: f64, rho13: f64, rho23: f64) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidCorrelation {
            rho12,
            rho13,
            rho23,
            reason,
        };
        for (name, r) in [("rho12", rho12), ("rho13", rho13), ("rho23", rho23)] {
            if !(r.is_finite() && r.abs() < 1.0) {
                return Err(invalid(format!("{name} must lie in (-1, 1)")));
            }
        }
        let det = Self::determinant(rho12, rho13, rho23);
        if !(det > 0.0) {
            return Err(invalid(format!("det R = {det} is not positive")));
        }
        if !(1.0 - rho12 * rho12 > 0.0) {
            return Err(invalid("1 - rho12^2 is not positive".into()));
        }
        Ok(ThreePointCorr {
            rho12,
            rho13,
            rho23,
        })
    }

    /// `det R = 1 - (rho12^2 + rho13^2 + rho23^2) + 2 rho12 rho13 rho23`.
    pub fn determinant(rho12: f64, rho13: f64, rho23: f64) -> f64 {
        1.0 - (rho12 * rho12 + rho13 * rho13 + rho23 * rho23) + 2.0 * rho12 * rho13 * rho23
    }

    pub fn rho12(&self) -> f64 {
        self.rho12
    }

    pub fn rho13(&self) -> f64 {
        self.rho13
    }

    pub fn rho23(&self) -> f64 {
        self.rho23
    }
}

/// The 3x3 correlation matrix with unit diagonal.
pub fn three_point_corr_matrix(c: &ThreePointCorr) -> Result<SymMatrix> {
    let c = ThreePointCorr::new(c.rho12, c.rho13, c.rho23)?;
    SymMatrix::from_rows(&[
        &[1.0, c.rho12, c.rho13],
        &[c.rho12, 1.0, c.rho23],
        &[c.rho13, c.rho23, 1.0],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cholesky, sym_eig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_examples() {
        let one = LocationSet::from_coords(&[&[0.5, 0.5]]).unwrap();
        assert_eq!(distance_matrix(&one), SymMatrix::zeros(1));

        let line = LocationSet::from_coords(&[&[0.0], &[3.0]]).unwrap();
        assert_eq!(
            distance_matrix(&line),
            SymMatrix::from_rows(&[&[0.0, 3.0], &[3.0, 0.0]]).unwrap()
        );

        let tri = LocationSet::from_coords(&[&[0.0, 0.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(distance_matrix(&tri).get(0, 1), 5.0);
    }

    #[test]
    fn location_validation() {
        assert!(Location::new(vec![]).is_err());
        assert!(Location::new(vec![0.0; 4]).is_err());
        assert!(Location::new(vec![f64::NAN]).is_err());
        assert!(LocationSet::from_coords(&[&[0.0, 1.0], &[0.0]]).is_err());
        assert!(matches!(
            LocationSet::from_coords(&[&[0.0, 1.0], &[0.0, 1.0]]),
            Err(Error::InvalidLocations(_))
        ));
        assert!(LocationSet::new(vec![]).is_err());
    }

    #[test]
    fn csv_reading() {
        let text = "x1,x2\n0.0,0.0\n3.0,4.0\n";
        let locs = LocationSet::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(locs.len(), 2);
        assert_eq!(locs.dim(), 2);
        assert_eq!(locs.get(1).coords(), &[3.0, 4.0]);

        assert!(LocationSet::from_csv_reader("a,b\n1,2\n".as_bytes()).is_err());
        assert!(LocationSet::from_csv_reader("x1,x2\n1,oops\n".as_bytes()).is_err());
        assert!(LocationSet::from_csv_reader("x1\n".as_bytes()).is_err());
    }

    #[test]
    fn kernel_examples() {
        for family in KernelFamily::ALL {
            let k = KernelSpec::new(family, 2.0, 0.7).unwrap();
            assert_eq!(k.covariance(0.0), 2.0);
            assert!(k.covariance(1e3) < 1e-12);
        }
        let k = KernelSpec::new(KernelFamily::Exponential, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(k.covariance(1.0), (-1.0_f64).exp(), epsilon = 1e-16);
        assert!(KernelSpec::new(KernelFamily::Gaussian, 0.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Gaussian, 1.0, -1.0).is_err());
        assert_eq!("matern52".parse::<KernelFamily>().unwrap(), KernelFamily::Matern52);
        assert!("bessel".parse::<KernelFamily>().is_err());
    }

    #[test]
    fn matern_closed_forms() {
        let d = 0.4;
        let phi = 0.5;
        let r = d / phi;
        let m32 = (1.0 + 3f64.sqrt() * r) * (-(3f64.sqrt()) * r).exp();
        let m52 = (1.0 + 5f64.sqrt() * r + 5.0 * r * r / 3.0) * (-(5f64.sqrt()) * r).exp();
        assert_abs_diff_eq!(KernelFamily::Matern32.correlation(d, phi), m32, epsilon = 1e-16);
        assert_abs_diff_eq!(KernelFamily::Matern52.correlation(d, phi), m52, epsilon = 1e-16);
        assert_abs_diff_eq!(
            KernelFamily::Gaussian.correlation(d, phi),
            (-0.64_f64).exp(),
            epsilon = 1e-16
        );
    }

    #[test]
    fn correlation_is_bounded_and_non_increasing() {
        for family in KernelFamily::ALL {
            assert_eq!(family.correlation(0.0, 0.3), 1.0);
            let mut prev = 1.0;
            for k in 0..=400 {
                let d = k as f64 * 0.005;
                let r = family.correlation(d, 0.3);
                assert!(r > 0.0 && r <= 1.0, "{family} at {d}: {r}");
                assert!(r <= prev, "{family} increased at {d}");
                prev = r;
            }
        }
    }

    #[test]
    fn random_cov_matrices_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[5usize, 50, 200] {
            let locs = LocationSet::uniform_unit_square(n, &mut rng).unwrap();
            for family in KernelFamily::ALL {
                // the gaussian kernel is numerically singular at long ranges
                let phi = if family == KernelFamily::Gaussian { 0.02 } else { 0.1 };
                let k = KernelSpec::new(family, 1.0, phi).unwrap();
                let c = cov_matrix(&k, &locs);
                assert_eq!(c.diag(), vec![1.0; n]);
                cholesky(&c).unwrap_or_else(|e| panic!("{family} n={n}: {e}"));
            }
        }
    }

    #[test]
    fn noise_ratio() {
        let k = KernelSpec::new(KernelFamily::Exponential, 2.0, 0.3).unwrap();
        let noise = NoiseSpec::new(0.5, &k).unwrap();
        assert_eq!(noise.delta2(), 0.25);
        assert_eq!(NoiseSpec::from_ratio(0.25, &k).unwrap().tau2(), 0.5);
        assert!(NoiseSpec::new(-1.0, &k).is_err());
    }

    #[test]
    fn three_point_examples() {
        let r = three_point_corr_matrix(&ThreePointCorr::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(r, SymMatrix::identity(3));

        assert_abs_diff_eq!(
            ThreePointCorr::determinant(0.5, 0.5, 0.5),
            0.5,
            epsilon = 1e-15
        );
        assert!(ThreePointCorr::new(0.5, 0.5, 0.5).is_ok());

        // 1 - 2.43 - 1.458 < 0
        assert!(ThreePointCorr::determinant(0.9, -0.9, 0.9) < 0.0);
        assert!(matches!(
            ThreePointCorr::new(0.9, -0.9, 0.9),
            Err(Error::InvalidCorrelation { .. })
        ));
        assert!(ThreePointCorr::new(1.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn three_point_validity_matches_eigenvalues(
            i in -19i32..=19, j in -19i32..=19, k in -19i32..=19
        ) {
            let (r12, r13, r23) = (i as f64 / 20.0, j as f64 / 20.0, k as f64 / 20.0);
            let m = SymMatrix::from_rows(&[&[1.0, r12, r13], &[r12, 1.0, r23], &[r13, r23, 1.0]])
                .unwrap();
            let min_eig = *sym_eig(&m).unwrap().values.last().unwrap();
            let ok = ThreePointCorr::new(r12, r13, r23).is_ok();
            // stay off the boundary where rounding decides
            prop_assume!(min_eig.abs() > 1e-12);
            prop_assert_eq!(ok, min_eig > 0.0);
        }
    }
}
