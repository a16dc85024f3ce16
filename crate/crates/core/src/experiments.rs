//! Seeded experiment drivers: the three-site study and its sweep, the random
//! location study comparing response and latent models, and the shrinkage
//! ensemble.
//!
//! Every driver is sequential and derives its random streams from explicit
//! seeds, so repeated runs produce bit-identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::analysis::{shrinkage_report, ShrinkageReport};
use crate::covariance::{
    cov_matrix, three_point_corr_matrix, KernelFamily, KernelSpec, LocationSet, ThreePointCorr,
};
use crate::divergence::kl_gaussian;
use crate::models::{parent_model, GaussianModel, ModelTriple};
use crate::numerics::SymMatrix;
use crate::vecchia::{build_neighbor_dag, build_ordering, NeighborDag, OrderingStrategy};
use crate::{Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes an `f64` as a JSON number with 17 significant digits.
pub(crate) fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::Error as _;
    if !x.is_finite() {
        return s.serialize_none();
    }
    let raw = serde_json::value::RawValue::from_string(fmt_f64(*x)).map_err(S::Error::custom)?;
    raw.serialize(s)
}

/// Absolute KL difference below which two models are declared tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Response,
    Latent,
    Tie,
}

impl Winner {
    pub fn from_kls(kl_response: f64, kl_latent: f64) -> Self {
        if (kl_response - kl_latent).abs() < TIE_TOLERANCE {
            Winner::Tie
        } else if kl_response < kl_latent {
            Winner::Response
        } else {
            Winner::Latent
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Winner::Response => "response",
            Winner::Latent => "latent",
            Winner::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreePointResult {
    #[serde(serialize_with = "ser_f64")]
    pub rho12: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rho13: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rho23: f64,
    #[serde(serialize_with = "ser_f64")]
    pub delta2: f64,
    #[serde(serialize_with = "ser_f64")]
    pub kl_response: f64,
    #[serde(serialize_with = "ser_f64")]
    pub kl_latent: f64,
    pub winner: Winner,
}

impl ThreePointResult {
    pub const CSV_HEADER: [&'static str; 7] = [
        "rho12",
        "rho13",
        "rho23",
        "delta2",
        "kl_response",
        "kl_latent",
        "winner",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            fmt_f64(self.rho12),
            fmt_f64(self.rho13),
            fmt_f64(self.rho23),
            fmt_f64(self.delta2),
            fmt_f64(self.kl_response),
            fmt_f64(self.kl_latent),
            self.winner.label().to_string(),
        ]
    }
}

fn check_sigma_delta(sigma2: f64, delta2: f64) -> Result<()> {
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
    Ok(())
}

/// KL divergences from the parent `sigma2 R + tau2 I` (`tau2 = delta2 sigma2`)
/// to the closed-form response and latent covariances of the three-site
/// chain.
pub fn run_three_point(c: &ThreePointCorr, sigma2: f64, delta2: f64) -> Result<ThreePointResult> {
    check_sigma_delta(sigma2, delta2)?;
    let (sigma_r, sigma_l) = crate::models::three_point_closed_forms(sigma2, delta2, c)?;
    let parent = three_point_parent(c, sigma2, delta2)?;
    let kl_response = kl_gaussian(&parent, &GaussianModel::zero_mean_covariance(sigma_r)?)?;
    let kl_latent = kl_gaussian(&parent, &GaussianModel::zero_mean_covariance(sigma_l)?)?;
    Ok(three_point_result(c, delta2, kl_response, kl_latent))
}

/// Same quantities as [`run_three_point`], but the response and latent models
/// come from the generic Vecchia pipeline on `sigma2 R` with the chain DAG.
pub fn run_three_point_pipeline(
    c: &ThreePointCorr,
    sigma2: f64,
    delta2: f64,
) -> Result<ThreePointResult> {
    check_sigma_delta(sigma2, delta2)?;
    let cov = three_point_corr_matrix(c)?.scale(sigma2);
    let triple = ModelTriple::build(&cov, delta2 * sigma2, &NeighborDag::chain(3))?;
    let kl_response = kl_gaussian(&triple.parent, &triple.response)?;
    let kl_latent = kl_gaussian(&triple.parent, &triple.latent)?;
    Ok(three_point_result(c, delta2, kl_response, kl_latent))
}

fn three_point_parent(c: &ThreePointCorr, sigma2: f64, delta2: f64) -> Result<GaussianModel> {
    parent_model(&three_point_corr_matrix(c)?.scale(sigma2), delta2 * sigma2)
}

fn three_point_result(
    c: &ThreePointCorr,
    delta2: f64,
    kl_response: f64,
    kl_latent: f64,
) -> ThreePointResult {
    ThreePointResult {
        rho12: c.rho12(),
        rho13: c.rho13(),
        rho23: c.rho23(),
        delta2,
        kl_response,
        kl_latent,
        winner: Winner::from_kls(kl_response, kl_latent),
    }
}

/// Cartesian grid for [`sweep_three_point`]. Also the JSON schema of the
/// `--grid-file` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreePointGrid {
    pub rho12: Vec<f64>,
    pub rho13: Vec<f64>,
    pub rho23: Vec<f64>,
    pub delta2: Vec<f64>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
}

fn default_sigma2() -> f64 {
    1.0
}

impl Default for ThreePointGrid {
    /// `rho` over `{-0.9, -0.6, ..., 0.9}` in every coordinate and
    /// `delta2` over `{0.1, 0.5, 1, 2}`.
    fn default() -> Self {
        let rho = vec![-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9];
        ThreePointGrid {
            rho12: rho.clone(),
            rho13: rho.clone(),
            rho23: rho,
            delta2: vec![0.1, 0.5, 1.0, 2.0],
            sigma2: 1.0,
        }
    }
}

impl ThreePointGrid {
    pub fn len(&self) -> usize {
        self.rho12.len() * self.rho13.len() * self.rho23.len() * self.delta2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub results: Vec<ThreePointResult>,
    /// Grid points whose correlation triple is not positive definite.
    pub skipped: usize,
}

/// [`run_three_point`] over every valid grid point, lexicographic in
/// `(rho12, rho13, rho23, delta2)` grid indices.
pub fn sweep_three_point(grid: &ThreePointGrid) -> Result<SweepOutput> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let mut results = Vec::new();
    let mut skipped = 0;
    for &r12 in &grid.rho12 {
        for &r13 in &grid.rho13 {
            for &r23 in &grid.rho23 {
                let corr = ThreePointCorr::new(r12, r13, r23);
                for &d2 in &grid.delta2 {
                    match corr.as_ref().map(|c| run_three_point(c, grid.sigma2, d2)) {
                        Ok(Ok(res)) => results.push(res),
                        Ok(Err(e)) if !e.is_numerical() => return Err(e),
                        _ => skipped += 1,
                    }
                }
            }
        }
    }
    Ok(SweepOutput { results, skipped })
}

/// Configuration of the random-location comparison.
#[derive(Debug, Clone)]
pub struct RandomStudyConfig {
    pub n: usize,
    pub m: usize,
    pub kernel: KernelSpec,
    pub tau2: f64,
    pub n_seeds: usize,
    pub seed0: u64,
    /// Fixed locations used for every seed instead of uniform draws.
    pub locations: Option<LocationSet>,
}

impl RandomStudyConfig {
    /// `n = 100`, `m = 5`, exponential kernel with `sigma2 = 1`, `phi = 0.3`,
    /// `tau2 = 0.1`, 50 seeds starting at 0.
    pub fn reference() -> Self {
        RandomStudyConfig {
            n: 100,
            m: 5,
            kernel: KernelSpec::new(KernelFamily::Exponential, 1.0, 0.3)
                .expect("valid kernel"),
            tau2: 0.1,
            n_seeds: 50,
            seed0: 0,
            locations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomStudyRow {
    pub seed: u64,
    pub kl_response: f64,
    pub kl_latent: f64,
    pub winner: Winner,
}

impl RandomStudyRow {
    pub const CSV_HEADER: [&'static str; 4] = ["seed", "kl_response", "kl_latent", "winner"];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            fmt_f64(self.kl_response),
            fmt_f64(self.kl_latent),
            self.winner.label().to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudySummary {
    pub n_configs: usize,
    pub latent_wins: usize,
    pub response_wins: usize,
    pub ties: usize,
    #[serde(serialize_with = "ser_f64")]
    pub mean_kl_response: f64,
    #[serde(serialize_with = "ser_f64")]
    pub mean_kl_latent: f64,
}

impl StudySummary {
    pub fn from_rows(rows: &[RandomStudyRow]) -> Self {
        let count = |w: Winner| rows.iter().filter(|r| r.winner == w).count();
        let n = rows.len().max(1) as f64;
        StudySummary {
            n_configs: rows.len(),
            latent_wins: count(Winner::Latent),
            response_wins: count(Winner::Response),
            ties: count(Winner::Tie),
            mean_kl_response: rows.iter().map(|r| r.kl_response).sum::<f64>() / n,
            mean_kl_latent: rows.iter().map(|r| r.kl_latent).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomStudy {
    pub rows: Vec<RandomStudyRow>,
    pub summary: StudySummary,
}

/// One seed of the random study: locations, coordinate ordering,
/// `m`-nearest-predecessor DAG and the two collapsed-space KLs.
pub fn random_study_seed(cfg: &RandomStudyConfig, seed: u64) -> Result<RandomStudyRow> {
    let locs = match &cfg.locations {
        Some(l) => l.clone(),
        None => LocationSet::uniform_unit_square(cfg.n, &mut ChaCha8Rng::seed_from_u64(seed))?,
    };
    let ord = build_ordering(&locs, &OrderingStrategy::Coordinate)?;
    let dag = build_neighbor_dag(&locs, &ord, cfg.m)?;
    let c = cov_matrix(&cfg.kernel, &locs.reordered(ord.perm())?);
    let triple = ModelTriple::build(&c, cfg.tau2, &dag)?;
    let kl_response = kl_gaussian(&triple.parent, &triple.response)?;
    let kl_latent = kl_gaussian(&triple.parent, &triple.latent)?;
    Ok(RandomStudyRow {
        seed,
        kl_response,
        kl_latent,
        winner: Winner::from_kls(kl_response, kl_latent),
    })
}

pub fn run_random_study(cfg: &RandomStudyConfig) -> Result<RandomStudy> {
    let n = cfg.locations.as_ref().map_or(cfg.n, LocationSet::len);
    if n < 3 {
        return Err(Error::InvalidParameter(format!("n must be at least 3, got {n}")));
    }
    if cfg.m < 1 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    if cfg.n_seeds < 1 {
        return Err(Error::InvalidParameter("at least one seed required".into()));
    }
    if !(cfg.tau2 >= 0.0 && cfg.tau2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tau2 must be non-negative, got {}",
            cfg.tau2
        )));
    }
    let rows = (0..cfg.n_seeds as u64)
        .map(|k| {
            let seed = cfg.seed0.wrapping_add(k);
            random_study_seed(cfg, seed).map_err(|e| e.context(format!("seed {seed}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = StudySummary::from_rows(&rows);
    Ok(RandomStudy { rows, summary })
}

/// One configuration of the shrinkage study.
#[derive(Debug, Clone)]
pub struct ShrinkageConfig {
    pub n: usize,
    pub m: usize,
    pub kernel: KernelSpec,
    pub delta2: f64,
    /// Seed of the uniform location draw (ignored when `locations` is set).
    pub seed: u64,
    pub locations: Option<LocationSet>,
}

impl ShrinkageConfig {
    pub fn tau2(&self) -> f64 {
        self.delta2 * self.kernel.sigma2()
    }

    pub fn describe(&self) -> String {
        format!(
            "n={} m={} delta2={} kernel={} sigma2={} phi={} seed={}",
            self.n,
            self.m,
            self.delta2,
            self.kernel.family,
            self.kernel.sigma2(),
            self.kernel.phi(),
            self.seed
        )
    }

    /// Latent covariance `C` in ordered positions and the neighbor DAG.
    pub fn problem(&self) -> Result<(SymMatrix, NeighborDag)> {
        let locs = match &self.locations {
            Some(l) => l.clone(),
            None => {
                LocationSet::uniform_unit_square(self.n, &mut ChaCha8Rng::seed_from_u64(self.seed))?
            }
        };
        let ord = build_ordering(&locs, &OrderingStrategy::Coordinate)?;
        let dag = build_neighbor_dag(&locs, &ord, self.m)?;
        Ok((cov_matrix(&self.kernel, &locs.reordered(ord.perm())?), dag))
    }

    pub fn report(&self) -> Result<ShrinkageReport> {
        let (c, dag) = self.problem()?;
        shrinkage_report(&c, self.tau2(), &dag)
    }
}

/// Range used for each family in the default shrinkage ensemble.
///
/// The smoother families become numerically singular on dense uniform
/// designs at long ranges, so their ranges are shortened to keep `C^{-1}`
/// accurate enough for the `E` and `Delta` comparisons.
pub fn ensemble_phi(family: KernelFamily) -> f64 {
    match family {
        KernelFamily::Exponential => 0.3,
        KernelFamily::Matern32 => 0.1,
        KernelFamily::Matern52 => 0.05,
        KernelFamily::Gaussian => 0.02,
    }
}

pub const ENSEMBLE_N: [usize; 4] = [10, 25, 50, 100];
pub const ENSEMBLE_M: [usize; 4] = [1, 2, 5, 10];
pub const ENSEMBLE_DELTA2: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Location seed used for a given `n` in the ensemble, shared across `m`,
/// `delta2` and kernel so that those factors vary on a common design.
pub fn ensemble_seed(seed0: u64, n: usize) -> u64 {
    seed0.wrapping_add(n as u64)
}

/// The full `n x m x delta2 x family` grid (256 configurations, `sigma2 = 1`),
/// ordered with `n` outermost and family innermost.
pub fn default_shrinkage_ensemble(seed0: u64) -> Vec<ShrinkageConfig> {
    shrinkage_ensemble(&ENSEMBLE_N, &ENSEMBLE_M, &ENSEMBLE_DELTA2, seed0)
}

pub fn shrinkage_ensemble(
    ns: &[usize],
    ms: &[usize],
    delta2s: &[f64],
    seed0: u64,
) -> Vec<ShrinkageConfig> {
    let mut out = Vec::new();
    for &n in ns {
        for &m in ms {
            for &delta2 in delta2s {
                for family in KernelFamily::ALL {
                    out.push(ShrinkageConfig {
                        n,
                        m,
                        kernel: KernelSpec::new(family, 1.0, ensemble_phi(family))
                            .expect("valid kernel"),
                        delta2,
                        seed: ensemble_seed(seed0, n),
                        locations: None,
                    });
                }
            }
        }
    }
    out
}

/// Outcome of one configuration; failures carry the configuration so the
/// study can keep going.
#[derive(Debug)]
pub struct ShrinkageOutcome {
    pub config: ShrinkageConfig,
    pub result: Result<ShrinkageReport>,
}

impl ShrinkageOutcome {
    pub const CSV_HEADER: [&'static str; 14] = [
        "n",
        "m",
        "delta2",
        "kernel",
        "norm_e",
        "norm_b",
        "norm_delta",
        "norm_remainder",
        "ratio_shrink",
        "ratio_remainder",
        "norm_k_error",
        "bound_holds",
        "norm2_e",
        "norm2_b",
    ];

    /// `None` for failed configurations.
    pub fn csv_record(&self) -> Option<Vec<String>> {
        let r = self.result.as_ref().ok()?;
        let c = &self.config;
        Some(vec![
            c.locations.as_ref().map_or(c.n, LocationSet::len).to_string(),
            c.m.to_string(),
            fmt_f64(c.delta2),
            c.kernel.family.to_string(),
            fmt_f64(r.norm_e),
            fmt_f64(r.norm_b),
            fmt_f64(r.norm_delta),
            fmt_f64(r.norm_remainder),
            fmt_f64(r.ratio_shrink),
            fmt_f64(r.ratio_remainder),
            fmt_f64(r.norm_k_error),
            r.bound_holds.to_string(),
            fmt_f64(r.norm2_e),
            fmt_f64(r.norm2_b),
        ])
    }
}

/// One report per configuration, in input order.
pub fn run_shrinkage_study(configs: &[ShrinkageConfig]) -> Result<Vec<ShrinkageOutcome>> {
    if configs.is_empty() {
        return Err(Error::InvalidParameter("empty shrinkage grid".into()));
    }
    Ok(configs
        .iter()
        .map(|cfg| ShrinkageOutcome {
            config: cfg.clone(),
            result: cfg.report().map_err(|e| e.context(cfg.describe())),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn winner_thresholds() {
        assert_eq!(Winner::from_kls(0.1, 0.1 + 1e-13), Winner::Tie);
        assert_eq!(Winner::from_kls(0.1, 0.2), Winner::Response);
        assert_eq!(Winner::from_kls(0.2, 0.1), Winner::Latent);
    }

    #[test]
    fn three_point_response_zero_case() {
        // rho13 = rho12 rho23 / (1 + delta2)
        let c = ThreePointCorr::new(0.6, 0.24, 0.6).unwrap();
        let r = run_three_point(&c, 1.0, 0.5).unwrap();
        assert!(r.kl_response.abs() <= 1e-12, "{r:?}");
        assert_eq!(r.winner, Winner::Response);
    }

    #[test]
    fn three_point_latent_zero_case() {
        let c = ThreePointCorr::new(0.6, 0.36, 0.6).unwrap();
        for delta2 in [0.1, 0.5, 2.0] {
            let r = run_three_point(&c, 1.0, delta2).unwrap();
            assert!(r.kl_latent.abs() <= 1e-12, "{r:?}");
            assert_eq!(r.winner, Winner::Latent);
        }
    }

    #[test]
    fn three_point_no_noise_ties() {
        let c = ThreePointCorr::new(0.3, -0.6, 0.5).unwrap();
        let r = run_three_point(&c, 1.5, 0.0).unwrap();
        assert!((r.kl_response - r.kl_latent).abs() <= 1e-12);
        assert_eq!(r.winner, Winner::Tie);
    }

    #[test]
    fn three_point_matches_pipeline() {
        let c = ThreePointCorr::new(0.7, -0.1, 0.4).unwrap();
        let a = run_three_point(&c, 2.0, 0.3).unwrap();
        let b = run_three_point_pipeline(&c, 2.0, 0.3).unwrap();
        assert!((a.kl_response - b.kl_response).abs() < 1e-10);
        assert!((a.kl_latent - b.kl_latent).abs() < 1e-10);
    }

    #[test]
    fn sweep_singleton_and_ties() {
        let grid = ThreePointGrid {
            rho12: vec![0.6],
            rho13: vec![0.1],
            rho23: vec![0.3],
            delta2: vec![0.5],
            sigma2: 1.0,
        };
        let out = sweep_three_point(&grid).unwrap();
        let direct = run_three_point(&ThreePointCorr::new(0.6, 0.1, 0.3).unwrap(), 1.0, 0.5).unwrap();
        assert_eq!(out.results, vec![direct]);

        let grid = ThreePointGrid {
            delta2: vec![0.0],
            ..ThreePointGrid::default()
        };
        let out = sweep_three_point(&grid).unwrap();
        assert!(!out.results.is_empty());
        assert!(out.results.iter().all(|r| r.winner == Winner::Tie));
    }

    #[test]
    fn sweep_counts_invalid_points() {
        let grid = ThreePointGrid {
            rho12: vec![0.9],
            rho13: vec![-0.9, 0.8],
            rho23: vec![0.9],
            delta2: vec![0.1, 1.0],
            sigma2: 1.0,
        };
        let out = sweep_three_point(&grid).unwrap();
        assert_eq!(out.skipped, 2);
        assert_eq!(out.results.len(), 2);

        let empty = ThreePointGrid {
            rho12: vec![],
            ..ThreePointGrid::default()
        };
        assert!(sweep_three_point(&empty).is_err());
    }

    #[test]
    fn sweep_has_both_winners() {
        let out = sweep_three_point(&ThreePointGrid::default()).unwrap();
        assert!(out.results.iter().any(|r| r.winner == Winner::Latent));
        assert!(out.results.iter().any(|r| r.winner == Winner::Response));
        assert_eq!(out.results.len() + out.skipped, ThreePointGrid::default().len());
    }

    #[test]
    fn random_study_degenerate_cases() {
        let mut cfg = RandomStudyConfig {
            n: 12,
            m: 11,
            n_seeds: 4,
            ..RandomStudyConfig::reference()
        };
        let study = run_random_study(&cfg).unwrap();
        assert_eq!(study.summary.ties, 4);
        assert!(study
            .rows
            .iter()
            .all(|r| r.kl_response.abs() < 1e-10 && r.kl_latent.abs() < 1e-10));

        cfg.m = 2;
        cfg.tau2 = 0.0;
        let study = run_random_study(&cfg).unwrap();
        assert_eq!(study.summary.ties, 4);

        cfg.n = 2;
        assert!(run_random_study(&cfg).is_err());
    }

    #[test]
    fn random_study_is_deterministic() {
        let cfg = RandomStudyConfig {
            n: 30,
            n_seeds: 3,
            ..RandomStudyConfig::reference()
        };
        let a = run_random_study(&cfg).unwrap();
        let b = run_random_study(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.summary, b.summary);
        let s = a.summary;
        assert_eq!(s.latent_wins + s.response_wins + s.ties, s.n_configs);
    }

    #[test]
    fn shrinkage_study_restricted_grids() {
        let zero_noise = shrinkage_ensemble(&[10, 25], &[1, 2], &[0.0], 3);
        for out in run_shrinkage_study(&zero_noise).unwrap() {
            let r = out.result.unwrap();
            assert_eq!(r.ratio_shrink, 1.0);
        }
        let saturated = shrinkage_ensemble(&[10], &[9, 20], &[0.1, 1.0], 3);
        for out in run_shrinkage_study(&saturated).unwrap() {
            let r = out.result.unwrap();
            assert!(r.norm_e < 1e-9 && r.norm_b < 1e-9 && r.norm_delta < 1e-9);
            assert!(r.bound_holds);
        }
        assert!(run_shrinkage_study(&[]).is_err());
    }

    #[test]
    fn shrinkage_study_reports_failures() {
        let locs = LocationSet::from_coords(&[&[0.0, 0.0], &[1e-9, 0.0], &[1.0, 1.0]]).unwrap();
        let cfg = ShrinkageConfig {
            n: 3,
            m: 1,
            kernel: KernelSpec::new(KernelFamily::Gaussian, 1.0, 10.0).unwrap(),
            delta2: 0.1,
            seed: 0,
            locations: Some(locs),
        };
        let ok = shrinkage_ensemble(&[10], &[1], &[0.1], 0);
        let mut configs = vec![cfg];
        configs.extend(ok);
        let out = run_shrinkage_study(&configs).unwrap();
        assert_eq!(out.len(), 5);
        let err = out[0].result.as_ref().unwrap_err();
        assert!(err.is_numerical());
        assert!(err.to_string().contains("kernel=gaussian"));
        assert!(out[1..].iter().all(|o| o.result.is_ok()));
    }
}
