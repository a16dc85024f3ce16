//! Experiment driver for response vs. latent NNGP comparisons.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid arguments, 3 numerical
//! failure (the offending configuration is printed on stderr).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nngp_kl::covariance::{KernelFamily, KernelSpec, LocationSet, ThreePointCorr};
use nngp_kl::divergence::{toy_example, ToyVariant};
use nngp_kl::experiments::{
    default_shrinkage_ensemble, fmt_f64, run_random_study, run_shrinkage_study, run_three_point,
    sweep_three_point, RandomStudyConfig, RandomStudyRow, ShrinkageConfig, ShrinkageOutcome,
    ThreePointGrid, ThreePointResult,
};

#[derive(Parser)]
#[command(name = "nngp-kl", version, about = "KL comparisons of response and latent NNGP models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Exponential,
    Matern32,
    Matern52,
    Gaussian,
}

impl From<Kernel> for KernelFamily {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Exponential => KernelFamily::Exponential,
            Kernel::Matern32 => KernelFamily::Matern32,
            Kernel::Matern52 => KernelFamily::Matern52,
            Kernel::Gaussian => KernelFamily::Gaussian,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Two-level hierarchical example: joint vs. collapsed KL orderings.
    Toy {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        variant: u8,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Closed-form three-site comparison under the chain DAG.
    ThreePoint {
        #[arg(long, allow_hyphen_values = true)]
        rho12: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho13: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho23: f64,
        #[arg(long)]
        delta2: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
    },
    /// Three-site comparison over a correlation / noise grid (CSV).
    Sweep {
        /// JSON grid: {"rho12": [..], "rho13": [..], "rho23": [..], "delta2": [..]}
        #[arg(long)]
        grid_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-location comparison; per-seed CSV to --out, summary JSON to stdout.
    RandomStudy {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, value_enum, default_value = "exponential")]
        kernel: Kernel,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0.3)]
        phi: f64,
        #[arg(long, default_value_t = 0.1)]
        tau2: f64,
        #[arg(long, default_value_t = 50)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        /// Location CSV (header x1..xd) used for every seed; overrides --n.
        #[arg(long)]
        locations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error-shrinkage norms for one configuration or the default ensemble (CSV).
    Shrinkage {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 0.5)]
        tau2: f64,
        #[arg(long, value_enum, default_value = "exponential")]
        kernel: Kernel,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0.3)]
        phi: f64,
        /// Seed of the uniform location draw (single configuration) or base
        /// seed of the ensemble.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run the full n x m x delta2 x kernel ensemble instead.
        #[arg(long, conflicts_with = "locations")]
        ensemble: bool,
        /// Location CSV (header x1..xd); overrides --n.
        #[arg(long)]
        locations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Io(String),
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<nngp_kl::Error> for Failure {
    fn from(e: nngp_kl::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Toy { variant, format } => toy(variant, format),
        Command::ThreePoint {
            rho12,
            rho13,
            rho23,
            delta2,
            sigma2,
        } => {
            let corr = ThreePointCorr::new(rho12, rho13, rho23)?;
            let result = run_three_point(&corr, sigma2, delta2)?;
            print_json(&result)
        }
        Command::Sweep { grid_file, out } => sweep(grid_file.as_deref(), out.as_deref()),
        Command::RandomStudy {
            n,
            m,
            kernel,
            sigma2,
            phi,
            tau2,
            seeds,
            seed0,
            locations,
            out,
        } => {
            let cfg = RandomStudyConfig {
                n,
                m,
                kernel: KernelSpec::new(kernel.into(), sigma2, phi)?,
                tau2,
                n_seeds: seeds,
                seed0,
                locations: read_locations(locations.as_deref())?,
            };
            let study = run_random_study(&cfg)?;
            if let Some(path) = out {
                let mut w = csv::Writer::from_writer(create(&path)?);
                w.write_record(RandomStudyRow::CSV_HEADER)?;
                for row in &study.rows {
                    w.write_record(row.csv_record())?;
                }
                w.flush()?;
            }
            print_json(&study.summary)
        }
        Command::Shrinkage {
            n,
            m,
            tau2,
            kernel,
            sigma2,
            phi,
            seed,
            ensemble,
            locations,
            out,
        } => {
            let configs = if ensemble {
                default_shrinkage_ensemble(seed)
            } else {
                let kernel = KernelSpec::new(kernel.into(), sigma2, phi)?;
                if !(tau2 >= 0.0 && tau2.is_finite()) {
                    return Err(Failure::Usage(format!(
                        "tau2 must be non-negative, got {tau2}"
                    )));
                }
                vec![ShrinkageConfig {
                    n,
                    m,
                    kernel,
                    delta2: tau2 / sigma2,
                    seed,
                    locations: read_locations(locations.as_deref())?,
                }]
            };
            shrinkage(&configs, out.as_deref())
        }
    }
}

fn toy(variant: u8, format: Format) -> CliResult {
    let variant = if variant == 1 {
        ToyVariant::One
    } else {
        ToyVariant::Two
    };
    let report = toy_example(variant);
    match format {
        Format::Json => print_json(&report),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record([
                "kl_joint_q1",
                "kl_joint_q2",
                "kl_marginal_q1",
                "kl_marginal_q2",
                "joint_order",
                "marginal_order",
            ])?;
            w.write_record([
                fmt_f64(report.kl_joint_q1),
                fmt_f64(report.kl_joint_q2),
                fmt_f64(report.kl_marginal_q1),
                fmt_f64(report.kl_marginal_q2),
                report.joint_order.label().to_string(),
                report.marginal_order.label().to_string(),
            ])?;
            w.flush()?;
            Ok(())
        }
    }
}

fn sweep(grid_file: Option<&Path>, out: Option<&Path>) -> CliResult {
    let grid = match grid_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ThreePointGrid>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => ThreePointGrid::default(),
    };
    let output = sweep_three_point(&grid)?;
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(ThreePointResult::CSV_HEADER)?;
    for r in &output.results {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    if output.skipped > 0 {
        eprintln!(
            "skipped {} grid points with a non positive definite correlation matrix",
            output.skipped
        );
    }
    Ok(())
}

fn shrinkage(configs: &[ShrinkageConfig], out: Option<&Path>) -> CliResult {
    let outcomes = run_shrinkage_study(configs)?;
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(ShrinkageOutcome::CSV_HEADER)?;
    let mut failures = Vec::new();
    for o in &outcomes {
        match (o.csv_record(), &o.result) {
            (Some(rec), _) => w.write_record(rec)?,
            (None, Err(e)) => failures.push(e),
            (None, Ok(_)) => unreachable!("successful outcome without a record"),
        }
    }
    w.flush()?;
    if failures.is_empty() {
        return Ok(());
    }
    for e in &failures {
        eprintln!("failed: {e}");
    }
    let numerical = failures.iter().all(|e| e.is_numerical());
    let msg = format!("{} of {} configurations failed", failures.len(), outcomes.len());
    Err(if numerical {
        Failure::Numerical(msg)
    } else {
        Failure::Usage(msg)
    })
}

fn read_locations(path: Option<&Path>) -> Result<Option<LocationSet>, Failure> {
    path.map(|p| LocationSet::from_csv_path(p).map_err(Failure::from))
        .transpose()
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Io(format!("serializing output: {e}")))?;
    println!("{text}");
    Ok(())
}
