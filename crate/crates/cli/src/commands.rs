//! One function per subcommand. Each prints a human-readable summary and
//! returns the report.

use std::path::Path;

use bornforge::axioms::{
    check_degeneracy, check_functional_invariance, check_outcome_in_spectrum,
    check_unitary_invariance, run_suite, CheckReport, Form, SuiteConfig,
};
use bornforge::derivation::{self, DerivationCertificate, PermutationFamily};
use bornforge::gleason::{
    self, check_additivity, frame_from_state, reconstruct_density_report, spanning_projectors,
    DensityMatrix,
};
use bornforge::measurement::{self, born_law, RECOVERY_TOLERANCE};
use bornforge::random::{
    haar_matrix, instance_rng, observable_on_basis, random_density, random_law,
    random_observable, random_resolution, random_state,
};
use bornforge::{MeasurementLaw, Observable, State, TolerancePolicy, C64};
use serde::Serialize;

use crate::report::{detail, Detail, Report};
use crate::scenario::Scenario;
use crate::CliError;

/// Steps printed per certificate before the listing is elided.
const PRINTED_STEPS: usize = 24;

fn print_law(name: &str, law: &MeasurementLaw) {
    let cells: Vec<String> = law.iter().map(|(x, p)| format!("{x}: {p:.12}")).collect();
    println!("  {name}: {{{}}}", cells.join(", "));
}

fn print_certificate(cert: &DerivationCertificate, tol: &TolerancePolicy) {
    println!("certificate ({:?})", cert.case);
    for (i, s) in cert.steps.iter().enumerate().take(PRINTED_STEPS) {
        println!("  [{i}] {}  -- {} (discrepancy {:.2e})", s.claim, s.justification, s.discrepancy);
    }
    if cert.steps.len() > PRINTED_STEPS {
        println!("  ... {} more steps", cert.steps.len() - PRINTED_STEPS);
    }
    if let Some(law) = &cert.solved_law {
        print_law("law", law);
    }
    if let Some(m) = cert.solved_mean {
        println!("  mean: {m}");
    }
    if let Some(u) = cert.uniqueness {
        println!("  uniqueness: {u}");
    }
    if let Some(a) = cert.oracle_agreement {
        println!("  deviation from Born law: {a:.3e}");
    }
    for n in &cert.notes {
        println!("  note: {n}");
    }
    println!("  certificate {}", if cert.pass(tol) { "holds" } else { "FAILS" });
}

fn certificate_detail(index: usize, label: &str, cert: &DerivationCertificate, tol: &TolerancePolicy) -> Detail {
    detail(index, label, cert.max_discrepancy(), cert.pass(tol), cert)
}

fn report_detail(index: usize, r: &CheckReport) -> Detail {
    detail(index, format!("{:?} {}", r.axiom, r.instance), r.discrepancy, r.pass, r)
}

pub fn check_axioms(
    min_dim: usize,
    max_dim: usize,
    trials: usize,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<Report, CliError> {
    let config = SuiteConfig {
        trials,
        seed,
        min_dim,
        max_dim,
    };
    let results = run_suite(&config, tol)?;
    let details: Vec<Detail> = results
        .iter()
        .map(|r| {
            let label = format!("{} d={}", serde_json::to_value(r.kind).expect("kind"), r.dim);
            detail(r.index, label.replace('"', ""), r.max_discrepancy(), r.pass(), &r.reports)
        })
        .collect();
    for d in details.iter().filter(|d| !d.pass) {
        println!("failed instance {}: {} (discrepancy {:.3e})", d.index, d.label, d.discrepancy);
    }
    let checks: usize = results.iter().map(|r| r.reports.len()).sum();
    println!("{trials} instances, {checks} checks, dimensions {min_dim}..={max_dim}, seed {seed}");
    Ok(Report::new("check-axioms", tol.tol_law, details))
}

pub fn check_scenario(path: &Path, tol: &TolerancePolicy) -> Result<Report, CliError> {
    let scenario = Scenario::load(path)?;
    let x = scenario.observable(tol)?;
    let psi = scenario.state(tol)?;
    let mut reports = check_degeneracy(&x, tol)?;
    reports.push(check_outcome_in_spectrum(&psi, &x, tol)?);
    if let Some(f) = scenario.function()? {
        for form in [Form::Law, Form::Mean] {
            reports.push(check_functional_invariance(&psi, &x, &f, form, tol)?);
        }
    }
    let unitaries = [scenario.permutation_unitary(&x, tol)?, scenario.phase_unitary(&x, tol)?];
    for u in unitaries.iter().flatten() {
        for form in [Form::Law, Form::Mean] {
            reports.push(check_unitary_invariance(&psi, &x, u, form, tol)?);
        }
    }
    let details: Vec<Detail> = reports.iter().enumerate().map(|(i, r)| report_detail(i, r)).collect();
    for d in &details {
        println!("{} {} (discrepancy {:.3e})", if d.pass { "ok  " } else { "FAIL" }, d.label, d.discrepancy);
    }
    Ok(Report::new("check-axioms", tol.tol_law, details))
}

fn diagonal(d: usize, tol: &TolerancePolicy) -> Result<Observable, CliError> {
    let values: Vec<f64> = (0..d).map(|i| i as f64).collect();
    Ok(Observable::from_diagonal(&values, tol)?)
}

pub fn equal_weight(
    dim: usize,
    support: &[f64],
    seed: Option<u64>,
    scenario: Option<&Path>,
    cycles: bool,
    tol: &TolerancePolicy,
) -> Result<Report, CliError> {
    let (x, psi) = match scenario {
        Some(path) => {
            let s = Scenario::load(path)?;
            let x = s.observable(tol)?;
            let psi = match s.state {
                Some(_) => s.state(tol)?,
                None => derivation::equal_weight_state(support, &x, tol)?,
            };
            (x, psi)
        }
        None => {
            let x = match seed {
                None => diagonal(dim, tol)?,
                Some(seed) => {
                    let labels: Vec<f64> = (0..dim).map(|i| i as f64).collect();
                    observable_on_basis(&haar_matrix(dim, &mut instance_rng(seed, 0)), &labels)
                }
            };
            let psi = derivation::equal_weight_state(support, &x, tol)?;
            (x, psi)
        }
    };
    let family = if cycles {
        PermutationFamily::Cycles
    } else {
        PermutationFamily::Transpositions
    };
    let cert = derivation::derive_equal_weight_with(support, &x, &psi, family, tol)?;
    print_certificate(&cert, tol);
    Ok(Report::new(
        "derive equal-weight",
        tol.tol_law,
        vec![certificate_detail(0, "equal-weight", &cert, tol)],
    ))
}

pub fn mean_affine(x1: f64, x2: f64, tol: &TolerancePolicy) -> Result<Report, CliError> {
    let cert = derivation::derive_mean_affine(x1, x2, tol)?;
    print_certificate(&cert, tol);
    Ok(Report::new(
        "derive mean-affine",
        tol.tol_law,
        vec![certificate_detail(0, "mean-affine", &cert, tol)],
    ))
}

pub fn dyadic(m: u64, k: u32, x1: f64, x2: f64, tol: &TolerancePolicy) -> Result<Report, CliError> {
    let x = Observable::from_diagonal(&[x1, x2], tol)?;
    let cert = derivation::derive_dyadic(m, k, x1, x2, &x, tol)?;
    print_certificate(&cert, tol);
    Ok(Report::new(
        "derive dyadic",
        tol.tol_law,
        vec![certificate_detail(0, &format!("dyadic {m}/2^{k}"), &cert, tol)],
    ))
}

pub fn real_limit(w: f64, gap: f64, x1: f64, x2: f64, tol: &TolerancePolicy) -> Result<Report, CliError> {
    let x = Observable::from_diagonal(&[x1, x2], tol)?;
    let r = derivation::approximate_real(w, gap, x1, x2, &x, tol)?;
    let mut details = Vec::new();
    for (i, (entry, cert)) in r.entries.iter().zip(&r.certificates).enumerate() {
        println!(
            "k={:>2}  w_k={}/2^{} = {:.12}  |w_k - w| = {:.3e}  law gap {:.3e} <= bound {:.3e}",
            entry.level, entry.numerator, entry.level, entry.dyadic, entry.rounding_gap, entry.law_gap, entry.bound
        );
        #[derive(Serialize)]
        struct Level<'a> {
            entry: &'a derivation::RealLimitEntry,
            certificate: &'a DerivationCertificate,
        }
        details.push(detail(
            i,
            format!("level {}", entry.level),
            cert.max_discrepancy(),
            cert.pass(tol) && entry.law_gap <= entry.bound,
            &Level { entry, certificate: cert },
        ));
    }
    Ok(Report::new("derive real-limit", tol.tol_law, details))
}

pub fn phase_strip(
    dim: usize,
    seed: u64,
    scenario: Option<&Path>,
    tol: &TolerancePolicy,
) -> Result<Report, CliError> {
    let (psi, x) = match scenario {
        Some(path) => {
            let s = Scenario::load(path)?;
            (s.state(tol)?, s.observable(tol)?)
        }
        None => {
            let mut rng = instance_rng(seed, 0);
            let x = random_observable(dim, false, &mut rng);
            (random_state(dim, &mut rng), x)
        }
    };
    let (_, _, cert) = derivation::strip_phases(&psi, &x, tol)?;
    print_certificate(&cert, tol);
    Ok(Report::new(
        "derive phase-strip",
        tol.tol_law,
        vec![certificate_detail(0, "phase-strip", &cert, tol)],
    ))
}

pub fn shift_demo(dim: usize, with_indicator: bool, tol: &TolerancePolicy) -> Result<Report, CliError> {
    let cert = derivation::shift_demo(dim, with_indicator, tol)?;
    print_certificate(&cert, tol);
    Ok(Report::new(
        "derive shift-demo",
        tol.tol_law,
        vec![certificate_detail(0, "shift-demo", &cert, tol)],
    ))
}

#[derive(Serialize)]
struct ReconstructionRecord {
    dim: usize,
    frobenius_error: f64,
    residual: f64,
    min_eigenvalue: f64,
    clipped: bool,
    eigenvalues: Vec<f64>,
    /// Real and imaginary parts, row-major.
    density: Vec<Vec<[f64; 2]>>,
}

fn rows(rho: &DensityMatrix) -> Vec<Vec<[f64; 2]>> {
    let m = rho.matrix();
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Reconstruction passes when the Frobenius error stays within the solver's residual limit.
pub fn reconstruct(
    dim: usize,
    rank: usize,
    seed: u64,
    resolutions: usize,
    scenario: Option<&Path>,
    tol: &TolerancePolicy,
) -> Result<Report, CliError> {
    let rho = match scenario {
        Some(path) => DensityMatrix::pure(&Scenario::load(path)?.state(tol)?),
        None => {
            if rank == 0 || rank > dim {
                return Err(CliError::Input(format!("--rank must be in 1..={dim}")));
            }
            let mut rng = instance_rng(seed, 0);
            if rank == 1 {
                DensityMatrix::pure(&random_state(dim, &mut rng))
            } else {
                random_density(dim, rank, &mut rng)?
            }
        }
    };
    let d = rho.dim();
    let frame = frame_from_state(&rho, &spanning_projectors(d)?, tol)?;
    let rec = reconstruct_density_report(&frame, tol)?;
    let error = rec.density.frobenius_distance(&rho);
    println!(
        "reconstructed {d}x{d} density matrix from {} projectors: Frobenius error {error:.3e}, residual {:.3e}{}",
        frame.assignments().len(),
        rec.residual,
        if rec.clipped { ", negative eigenvalues clipped" } else { "" }
    );
    let record = ReconstructionRecord {
        dim: d,
        frobenius_error: error,
        residual: rec.residual,
        min_eigenvalue: rec.min_eigenvalue,
        clipped: rec.clipped,
        eigenvalues: rec.density.eigenvalues(),
        density: rows(&rec.density),
    };
    let mut details = vec![detail(0, "reconstruction", error, error <= gleason::RESIDUAL_LIMIT, &record)];
    let mut worst: f64 = 0.0;
    for i in 0..resolutions {
        let resolution = random_resolution(d, &mut instance_rng(seed, 1 + i as u64));
        let frame = frame_from_state(&rho, &resolution, tol)?;
        let r = check_additivity(&frame, &[resolution], tol)?;
        worst = worst.max(r.discrepancy);
        details.push(report_detail(i + 1, &r));
    }
    println!("additivity over {resolutions} random orthogonal resolutions: max gap {worst:.3e}");
    Ok(Report::new("gleason reconstruct", tol.tol_law, details))
}

pub fn sample(
    dim: usize,
    n: u64,
    seed: u64,
    max_tv: f64,
    scenario: Option<&Path>,
    tol: &TolerancePolicy,
) -> Result<Report, CliError> {
    // A scenario's own seed takes precedence for the draws.
    let (psi, x, seed): (State, Observable, u64) = match scenario {
        Some(path) => {
            let s = Scenario::load(path)?;
            (s.state(tol)?, s.observable(tol)?, s.seed.unwrap_or(seed))
        }
        None => {
            let mut rng = instance_rng(seed, 0);
            let x = random_observable(dim, false, &mut rng);
            (random_state(dim, &mut rng), x, seed)
        }
    };
    let law = born_law(&psi, &x, tol)?;
    let s = measurement::sample(&law, n, seed, tol)?;
    print_law("law", &law);
    for (x, c) in &s.counts {
        println!("  {x}: {c}");
    }
    println!("{n} draws, seed {seed}: TV distance {:.4e} (limit {max_tv})", s.tv_distance);
    #[derive(Serialize)]
    struct Record<'a> {
        law: &'a MeasurementLaw,
        sample: &'a measurement::SampleReport,
        max_tv: f64,
    }
    let d = detail(0, "sample", s.tv_distance, s.tv_distance <= max_tv, &Record { law: &law, sample: &s, max_tv });
    Ok(Report::new("sample", tol.tol_law, vec![d]))
}

pub fn phase_scan(
    trials: usize,
    seed: u64,
    min_dim: usize,
    max_dim: usize,
    tol: &TolerancePolicy,
) -> Result<Report, CliError> {
    let gaps = derivation::phase_invariance_scan(trials, seed, min_dim, max_dim, tol)?;
    let details: Vec<Detail> = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| detail(i, format!("trial {i}"), g, g <= tol.tol_law, &()))
        .collect();
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    println!("{trials} random states with random phases, dimensions {min_dim}..={max_dim}: max law change {worst:.3e}");
    Ok(Report::new("conjecture phase-scan", tol.tol_law, details))
}

/// Recovery passes within the fixed recovery tolerance of the means solver.
pub fn law_from_means(
    spectrum: &[f64],
    probabilities: Option<&[f64]>,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<Report, CliError> {
    let truth = match probabilities {
        Some(p) => MeasurementLaw::new(spectrum.to_vec(), p.to_vec(), tol)?,
        None => {
            let mut sorted = spectrum.to_vec();
            sorted.sort_by(f64::total_cmp);
            random_law(&sorted, &mut instance_rng(seed, 0))
        }
    };
    let oracle = |t: f64| {
        truth
            .iter()
            .map(|(x, p)| C64::from_polar(p, t * x.atan()))
            .sum::<C64>()
    };
    let recovered = measurement::law_from_means(oracle, truth.support(), tol)?;
    let error = recovered.sup_distance(&truth, tol);
    print_law("generating law", &truth);
    print_law("recovered law", &recovered);
    println!("recovery error {error:.3e}");
    #[derive(Serialize)]
    struct Record<'a> {
        truth: &'a MeasurementLaw,
        recovered: &'a MeasurementLaw,
    }
    let d = detail(
        0,
        "law-from-means",
        error,
        error <= RECOVERY_TOLERANCE,
        &Record { truth: &truth, recovered: &recovered },
    );
    Ok(Report::new("law-from-means", tol.tol_law, vec![d]))
}
