//! `bornforge` command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for invalid
//! input or usage.

mod commands;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use bornforge::TolerancePolicy;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const TOLERANCE_VAR: &str = "BORNFORGE_TOLERANCE";

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed input.
    Input(String),
    Engine(bornforge::Error),
}

impl From<bornforge::Error> for CliError {
    fn from(e: bornforge::Error) -> Self {
        CliError::Engine(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use bornforge::Error::*;
        match self {
            CliError::Input(_) => 2,
            // Numerical outcomes of a well-formed run count as failed checks.
            CliError::Engine(
                Infeasible { .. } | IllConditioned { .. } | InconsistentFrame { .. } | NotPsd { .. },
            ) => 1,
            CliError::Engine(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => f.write_str(msg),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bornforge",
    version,
    about = "Finite-dimensional checks of Born-rule axioms, derivations and density-matrix reconstruction",
    after_help = "Set BORNFORGE_TOLERANCE to override the law tolerance (default 1e-10)."
)]
struct Cli {
    /// Write a JSON report to this path.
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Randomized soundness suite for the measurement axioms (outcome in spectrum,
    /// eigenstate certainty, functional and unitary invariance, joint measurement)
    /// against the Born law, or the same checks on one scenario file.
    CheckAxioms(CheckAxiomsArgs),
    /// Derive outcome laws from the axioms alone and certify each step.
    #[command(subcommand)]
    Derive(DeriveCommand),
    /// Density-matrix reconstruction from frame-function values.
    #[command(subcommand)]
    Gleason(GleasonCommand),
    /// Monte Carlo sampling of a Born law with a total-variation check.
    Sample(SampleArgs),
    /// Numerical probes of open claims.
    #[command(subcommand)]
    Conjecture(ConjectureCommand),
    /// Recover an outcome law from the means of exp(i t arctan x).
    LawFromMeans(LawFromMeansArgs),
}

#[derive(Debug, Args)]
struct CheckAxiomsArgs {
    /// Largest Hilbert-space dimension; instance dimensions are drawn from [--min-dim, --dim].
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    min_dim: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check a single scenario file instead of random instances.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["trials", "seed", "min_dim"])]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum DeriveCommand {
    /// Equal-weight superposition over a support of eigenvalues: permutation
    /// symmetry plus one indicator row force the uniform law.
    EqualWeight(EqualWeightArgs),
    /// Mean of an equal superposition of two eigenstates from a reflection
    /// unitary and an affine relabelling.
    MeanAffine(MeanAffineArgs),
    /// Two-outcome law with weight m/2^k, reduced to an equal-weight law via an ancilla.
    Dyadic(DyadicArgs),
    /// Real weights as limits of dyadic weights, with a per-level error bound.
    RealLimit(RealLimitArgs),
    /// Remove amplitude phases with a diagonal unitary and check the law is unchanged.
    PhaseStrip(PhaseStripArgs),
    /// Shift-permutation system on a finite spectrum: underdetermined without
    /// an indicator row, unique with it.
    ShiftDemo(ShiftDemoArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Transpositions,
    Cycles,
}

#[derive(Debug, Args)]
struct EqualWeightArgs {
    /// Dimension of X = diag(0, 1, ..., dim-1).
    #[arg(long, default_value_t = 8)]
    dim: usize,
    /// Comma-separated eigenvalues carrying equal weight.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    support: Vec<f64>,
    /// Rotate X into a Haar-random eigenbasis drawn from this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Take X (and the state, if given) from a scenario file.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dim", "seed"])]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Family::Transpositions)]
    family: Family,
}

#[derive(Debug, Args)]
struct MeanAffineArgs {
    #[arg(long, allow_negative_numbers = true)]
    x1: f64,
    #[arg(long, allow_negative_numbers = true)]
    x2: f64,
}

#[derive(Debug, Args)]
struct DyadicArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    x2: f64,
}

#[derive(Debug, Args)]
struct RealLimitArgs {
    /// Target weight w in [0, 1] on x1.
    #[arg(long)]
    weight: f64,
    /// Stop at the first level with |w_k - w| below this gap.
    #[arg(long, default_value_t = 1e-3)]
    gap: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    x2: f64,
}

#[derive(Debug, Args)]
struct PhaseStripArgs {
    /// Dimension of the random state and nondegenerate observable.
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dim", "seed"])]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ShiftDemoArgs {
    #[arg(long)]
    dim: usize,
    /// Add the indicator row that makes the solution unique.
    #[arg(long)]
    with_indicator: bool,
}

#[derive(Debug, Subcommand)]
enum GleasonCommand {
    /// Reconstruct a density matrix from its values on a spanning projector
    /// family and check additivity on random orthogonal resolutions.
    Reconstruct(ReconstructArgs),
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Rank of the random density matrix (1 = pure state).
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random orthogonal resolutions for the additivity check.
    #[arg(long, default_value_t = 10)]
    resolutions: usize,
    /// Use the pure state of a scenario file.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dim", "rank"])]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest accepted total-variation distance to the generating law.
    #[arg(long, default_value_t = 0.01)]
    max_tv: f64,
    #[arg(long, value_name = "FILE", conflicts_with = "dim")]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ConjectureCommand {
    /// Check that the law depends only on the moduli of the amplitudes by
    /// stripping random phases from random states.
    PhaseScan(PhaseScanArgs),
}

#[derive(Debug, Args)]
struct PhaseScanArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    min_dim: usize,
    #[arg(long, default_value_t = 12)]
    max_dim: usize,
}

#[derive(Debug, Args)]
struct LawFromMeansArgs {
    /// Comma-separated distinct outcomes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    spectrum: Vec<f64>,
    /// Comma-separated probabilities; random weights from --seed when omitted.
    #[arg(long, value_delimiter = ',')]
    probabilities: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn tolerance() -> Result<TolerancePolicy, CliError> {
    let base = TolerancePolicy::default();
    match std::env::var(TOLERANCE_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(base),
        Err(e) => Err(CliError::Input(format!("{TOLERANCE_VAR}: {e}"))),
        Ok(text) => {
            let value: f64 = text
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("{TOLERANCE_VAR}: not a number: {text:?}")))?;
            base.with_law_tolerance(value)
                .map_err(|e| CliError::Input(format!("{TOLERANCE_VAR}: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<report::Report, CliError> {
    let tol = tolerance()?;
    use commands as c;
    match cli.command {
        Command::CheckAxioms(a) => match a.scenario {
            Some(path) => c::check_scenario(&path, &tol),
            None => c::check_axioms(a.min_dim, a.dim, a.trials, a.seed, &tol),
        },
        Command::Derive(d) => match d {
            DeriveCommand::EqualWeight(a) => c::equal_weight(
                a.dim,
                &a.support,
                a.seed,
                a.scenario.as_deref(),
                matches!(a.family, Family::Cycles),
                &tol,
            ),
            DeriveCommand::MeanAffine(a) => c::mean_affine(a.x1, a.x2, &tol),
            DeriveCommand::Dyadic(a) => c::dyadic(a.m, a.k, a.x1, a.x2, &tol),
            DeriveCommand::RealLimit(a) => c::real_limit(a.weight, a.gap, a.x1, a.x2, &tol),
            DeriveCommand::PhaseStrip(a) => c::phase_strip(a.dim, a.seed, a.scenario.as_deref(), &tol),
            DeriveCommand::ShiftDemo(a) => c::shift_demo(a.dim, a.with_indicator, &tol),
        },
        Command::Gleason(GleasonCommand::Reconstruct(a)) => c::reconstruct(
            a.dim,
            a.rank,
            a.seed,
            a.resolutions,
            a.scenario.as_deref(),
            &tol,
        ),
        Command::Sample(a) => c::sample(a.dim, a.n, a.seed, a.max_tv, a.scenario.as_deref(), &tol),
        Command::Conjecture(ConjectureCommand::PhaseScan(a)) => {
            c::phase_scan(a.trials, a.seed, a.min_dim, a.max_dim, &tol)
        }
        Command::LawFromMeans(a) => {
            c::law_from_means(&a.spectrum, a.probabilities.as_deref(), a.seed, &tol)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report_path = cli.report.clone();
    let outcome = run(cli).and_then(|report| {
        if let Some(path) = &report_path {
            report.write(path)?;
        }
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            println!(
                "{}: {} instance(s), max discrepancy {:.3e} (tol_law {:.1e})",
                if report.pass { "PASS" } else { "FAIL" },
                report.instances,
                report.max_discrepancy,
                report.tol_law
            );
            ExitCode::from(u8::from(!report.pass))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
