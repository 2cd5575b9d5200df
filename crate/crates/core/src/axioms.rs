//! Executable checks of the measurement axioms against the Born model.
//!
//! Each check evaluates both sides of an axiom instance with the Born oracle
//! and reports the discrepancy. A law-form discrepancy is the sup-norm over
//! the union of both supports; a mean-form discrepancy is the absolute
//! difference of the means.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{check_dim, conjugate_by, max_abs_diff, State};
use crate::measurement::{born_law, mean, pushforward, MeasurementLaw};
use crate::observable::{
    apply_function, diagonal_phase_unitary, join_all, permutation_unitary, product_join,
    FunctionSpec, Observable, UnitaryMap, UnitaryTag,
};
use crate::random::{
    haar_unitary, instance_rng, random_commuting_pair, random_function, random_observable,
    random_permutation, random_phases, random_state,
};
use crate::tolerance::TolerancePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axiom {
    /// Outcome lies in the spectrum.
    A0,
    /// Degeneracy in eigenstates.
    A1,
    A2Law,
    A2Mean,
    A3Law,
    A3Mean,
    /// Functional invariance for vectors of compatible observables.
    A2Vector,
    /// Additivity of a frame function over orthogonal families.
    FrameAdditivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Form {
    Law,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Side {
    Law(MeasurementLaw),
    Mean(f64),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub axiom: Axiom,
    pub instance: String,
    pub lhs: Side,
    pub rhs: Side,
    pub discrepancy: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(
        axiom: Axiom,
        instance: impl Into<String>,
        lhs: Side,
        rhs: Side,
        discrepancy: f64,
        tol: &TolerancePolicy,
    ) -> Self {
        Self {
            axiom,
            instance: instance.into(),
            lhs,
            rhs,
            discrepancy,
            pass: discrepancy <= tol.tol_law,
        }
    }

    fn compare(
        axiom_law: Axiom,
        axiom_mean: Axiom,
        form: Form,
        instance: String,
        lhs: MeasurementLaw,
        rhs: MeasurementLaw,
        extra: f64,
        tol: &TolerancePolicy,
    ) -> Self {
        match form {
            Form::Law => {
                let d = lhs.sup_distance(&rhs, tol).max(extra);
                Self::new(axiom_law, instance, Side::Law(lhs), Side::Law(rhs), d, tol)
            }
            Form::Mean => {
                let (a, b) = (mean(&lhs), mean(&rhs));
                let d = (a - b).abs().max(extra);
                Self::new(axiom_mean, instance, Side::Mean(a), Side::Mean(b), d, tol)
            }
        }
    }
}

/// The Born law is carried by the spectrum: its masses on eigenvalues sum to one.
pub fn check_outcome_in_spectrum(
    psi: &State,
    x: &Observable,
    tol: &TolerancePolicy,
) -> Result<CheckReport> {
    let law = born_law(psi, x, tol)?;
    let carried: f64 = x
        .eigenvalues()
        .iter()
        .map(|&e| law.probability_of(e, tol))
        .sum();
    Ok(CheckReport::new(
        Axiom::A0,
        format!("spectrum of {} eigenvalues", x.len()),
        Side::Value(carried),
        Side::Value(1.0),
        (carried - 1.0).abs(),
        tol,
    ))
}

/// One report per eigenvalue: a unit vector in `[X=x]` yields `x` with certainty.
pub fn check_degeneracy(x: &Observable, tol: &TolerancePolicy) -> Result<Vec<CheckReport>> {
    (0..x.len())
        .map(|i| {
            let v = x.eigenspace(i).column(0).into_owned();
            let psi = State::new(crate::hilbert::ComplexVector::new(v)?, tol)?;
            let law = born_law(&psi, x, tol)?;
            let target = MeasurementLaw::point_mass(x.eigenvalues()[i]);
            let d = law.sup_distance(&target, tol);
            Ok(CheckReport::new(
                Axiom::A1,
                format!("eigenstate of x={}", x.eigenvalues()[i]),
                Side::Law(law),
                Side::Law(target),
                d,
                tol,
            ))
        })
        .collect()
}

/// `law(f(meas_ψ X))` against `law(meas_ψ f(X))`, or their means.
pub fn check_functional_invariance(
    psi: &State,
    x: &Observable,
    f: &FunctionSpec,
    form: Form,
    tol: &TolerancePolicy,
) -> Result<CheckReport> {
    let lhs = pushforward(&born_law(psi, x, tol)?, f, tol)?;
    let rhs = born_law(psi, &apply_function(x, f, tol)?, tol)?;
    let kind = if f.is_injective(tol) { "injective" } else { "many-to-one" };
    Ok(CheckReport::compare(
        Axiom::A2Law,
        Axiom::A2Mean,
        form,
        format!("d={} |spectrum|={} f {kind}", x.dim(), x.len()),
        lhs,
        rhs,
        0.0,
        tol,
    ))
}

/// `law(meas_{Uψ} X)` against `law(meas_ψ U†XU)`. For permutation unitaries
/// the identity `U†XU = u(X)` is also checked and folded into the discrepancy.
pub fn check_unitary_invariance(
    psi: &State,
    x: &Observable,
    u: &UnitaryMap,
    form: Form,
    tol: &TolerancePolicy,
) -> Result<CheckReport> {
    check_dim(x.dim(), u.dim())?;
    check_dim(x.dim(), psi.dim())?;
    let deviation = u.matrix().unitarity_deviation();
    if deviation > tol.tol_unitary {
        return Err(Error::NotUnitary { deviation });
    }
    let lhs = born_law(&u.apply(psi, tol)?, x, tol)?;
    let rhs = born_law(psi, &x.conjugated(u)?, tol)?;
    let (extra, tag) = match u.tag() {
        UnitaryTag::Permutation(perm) => {
            let conj = conjugate_by(u.matrix(), &x.matrix(), tol)?;
            let ux = apply_function(x, &perm.as_function(), tol)?;
            (
                max_abs_diff(conj.matrix(), ux.matrix().matrix()),
                format!("permutation {}", perm.describe()),
            )
        }
        UnitaryTag::Diagonal(_) => (0.0, "diagonal phases".to_string()),
        UnitaryTag::General => (0.0, "general".to_string()),
    };
    Ok(CheckReport::compare(
        Axiom::A3Law,
        Axiom::A3Mean,
        form,
        format!("d={} U {tag}", x.dim()),
        lhs,
        rhs,
        extra,
        tol,
    ))
}

/// Functional invariance for a tuple function of mutually commuting observables.
pub fn check_vector_functional_invariance(
    psi: &State,
    xs: &[Observable],
    f: impl Fn(&[f64]) -> f64,
    form: Form,
    tol: &TolerancePolicy,
) -> Result<CheckReport> {
    let joint = join_all(xs, tol)?;
    let table = joint.tabulate(f)?;
    let lhs = pushforward(&born_law(psi, &joint.z, tol)?, &table, tol)?;
    let rhs = born_law(psi, &apply_function(&joint.z, &table, tol)?, tol)?;
    let mut report = CheckReport::compare(
        Axiom::A2Vector,
        Axiom::A2Vector,
        form,
        format!("k={} joint labels={}", xs.len(), joint.z.len()),
        lhs,
        rhs,
        0.0,
        tol,
    );
    report.axiom = Axiom::A2Vector;
    Ok(report)
}

/// The law of `X_index` alone equals the matching marginal of the joint law.
pub fn check_marginal(
    psi: &State,
    xs: &[Observable],
    index: usize,
    tol: &TolerancePolicy,
) -> Result<CheckReport> {
    if index >= xs.len() {
        return Err(Error::Precondition(format!("no observable at index {index}")));
    }
    let joint = join_all(xs, tol)?;
    let lhs = pushforward(&born_law(psi, &joint.z, tol)?, &joint.coordinate(index), tol)?;
    let rhs = born_law(psi, &xs[index], tol)?;
    let d = lhs.sup_distance(&rhs, tol);
    Ok(CheckReport::new(
        Axiom::A2Vector,
        format!("marginal {index} of k={}", xs.len()),
        Side::Law(lhs),
        Side::Law(rhs),
        d,
        tol,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Degeneracy,
    FunctionalInjective,
    FunctionalManyToOne,
    FunctionalAffine,
    UnitaryPermutation,
    UnitaryDiagonal,
    UnitaryHaar,
    UnitaryEigenstate,
    VectorCommuting,
    VectorProduct,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 10] = [
        InstanceKind::Degeneracy,
        InstanceKind::FunctionalInjective,
        InstanceKind::FunctionalManyToOne,
        InstanceKind::FunctionalAffine,
        InstanceKind::UnitaryPermutation,
        InstanceKind::UnitaryDiagonal,
        InstanceKind::UnitaryHaar,
        InstanceKind::UnitaryEigenstate,
        InstanceKind::VectorCommuting,
        InstanceKind::VectorProduct,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    pub min_dim: usize,
    pub max_dim: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            min_dim: 2,
            max_dim: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub index: usize,
    pub dim: usize,
    pub kind: InstanceKind,
    pub reports: Vec<CheckReport>,
}

impl InstanceResult {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.reports.iter().map(|r| r.discrepancy).fold(0.0, f64::max)
    }

    /// Mean-form reports pass whenever the law-form report of the same instance does.
    pub fn mean_implied_by_law(&self) -> bool {
        let law_pass = self
            .reports
            .iter()
            .filter(|r| matches!(r.lhs, Side::Law(_)))
            .all(|r| r.pass);
        let mean_pass = self
            .reports
            .iter()
            .filter(|r| matches!(r.lhs, Side::Mean(_)))
            .all(|r| r.pass);
        !law_pass || mean_pass
    }
}

/// Runs `trials` random instances, cycling through every [`InstanceKind`].
/// Instances run in parallel; results are ordered by index.
pub fn run_suite(config: &SuiteConfig, tol: &TolerancePolicy) -> Result<Vec<InstanceResult>> {
    if config.min_dim < 2 || config.max_dim < config.min_dim {
        return Err(Error::Precondition(format!(
            "invalid dimension range {}..={}",
            config.min_dim, config.max_dim
        )));
    }
    (0..config.trials)
        .into_par_iter()
        .map(|index| run_instance(config, index, tol))
        .collect()
}

pub fn run_instance(
    config: &SuiteConfig,
    index: usize,
    tol: &TolerancePolicy,
) -> Result<InstanceResult> {
    let mut rng = instance_rng(config.seed, index as u64);
    let dim = rng.random_range(config.min_dim..=config.max_dim);
    let kind = InstanceKind::ALL[index % InstanceKind::ALL.len()];
    let psi = random_state(dim, &mut rng);
    let mut reports = Vec::new();
    let both = |reports: &mut Vec<CheckReport>, f: &dyn Fn(Form) -> Result<CheckReport>| {
        reports.push(f(Form::Law)?);
        reports.push(f(Form::Mean)?);
        Ok::<_, Error>(())
    };
    match kind {
        InstanceKind::Degeneracy => {
            let x = random_observable(dim, rng.random_bool(0.5), &mut rng);
            reports.extend(check_degeneracy(&x, tol)?);
            reports.push(check_outcome_in_spectrum(&psi, &x, tol)?);
        }
        InstanceKind::FunctionalInjective | InstanceKind::FunctionalManyToOne => {
            let x = random_observable(dim, rng.random_bool(0.3), &mut rng);
            let injective = kind == InstanceKind::FunctionalInjective;
            let f = random_function(x.eigenvalues(), injective, &mut rng);
            both(&mut reports, &|form| {
                check_functional_invariance(&psi, &x, &f, form, tol)
            })?;
        }
        InstanceKind::FunctionalAffine => {
            let x = random_observable(dim, rng.random_bool(0.3), &mut rng);
            let a = rng.random_range(-3.0..3.0);
            let b = rng.random_range(-3.0..3.0);
            let f = FunctionSpec::affine(x.eigenvalues(), a, b)?;
            both(&mut reports, &|form| {
                check_functional_invariance(&psi, &x, &f, form, tol)
            })?;
        }
        InstanceKind::UnitaryPermutation => {
            let x = random_observable(dim, false, &mut rng);
            let perm = random_permutation(x.eigenvalues(), &mut rng);
            let u = permutation_unitary(&x, &perm, tol)?;
            both(&mut reports, &|form| check_unitary_invariance(&psi, &x, &u, form, tol))?;
        }
        InstanceKind::UnitaryDiagonal => {
            let x = random_observable(dim, false, &mut rng);
            let phases = random_phases(x.eigenvalues(), &mut rng);
            let u = diagonal_phase_unitary(&x, &phases, tol)?;
            both(&mut reports, &|form| check_unitary_invariance(&psi, &x, &u, form, tol))?;
        }
        InstanceKind::UnitaryHaar => {
            let x = random_observable(dim, rng.random_bool(0.3), &mut rng);
            let u = haar_unitary(dim, &mut rng);
            both(&mut reports, &|form| check_unitary_invariance(&psi, &x, &u, form, tol))?;
        }
        InstanceKind::UnitaryEigenstate => {
            let x = random_observable(dim, false, &mut rng);
            let k = rng.random_range(0..x.len());
            let eigen = x.eigenvector(k)?;
            let perm = random_permutation(x.eigenvalues(), &mut rng);
            let u = permutation_unitary(&x, &perm, tol)?;
            both(&mut reports, &|form| check_unitary_invariance(&eigen, &x, &u, form, tol))?;
        }
        InstanceKind::VectorCommuting => {
            let (x, y) = random_commuting_pair(dim, &mut rng);
            let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let xs = [x, y];
            both(&mut reports, &|form| {
                check_vector_functional_invariance(&psi, &xs, |t| a * t[0] + b * t[1] * t[1], form, tol)
            })?;
            reports.push(check_marginal(&psi, &xs, 0, tol)?);
            reports.push(check_marginal(&psi, &xs, 1, tol)?);
        }
        InstanceKind::VectorProduct => {
            // Split dim into a product of two factors where possible.
            let left = (2..=dim).find(|f| dim % f == 0 && *f < dim).unwrap_or(1);
            let right = dim / left;
            let x = random_observable(left, false, &mut rng);
            let y = random_observable(right, false, &mut rng);
            let joint = product_join(&x, &y);
            let xs = [x.extend_right(right), y.extend_left(left)];
            both(&mut reports, &|form| {
                check_vector_functional_invariance(&psi, &xs, |t| t[0] + t[1], form, tol)
            })?;
            reports.push(check_marginal(&psi, &xs, 0, tol)?);
            // The fast product join labels the same joint eigenspaces.
            let slow = join_all(&xs, tol)?;
            let lhs = born_law(&psi, &joint.z, tol)?;
            let rhs = born_law(&psi, &slow.z, tol)?;
            let d = lhs.sup_distance(&rhs, tol);
            reports.push(CheckReport::new(
                Axiom::A2Vector,
                "product join agrees with generic join",
                Side::Law(lhs),
                Side::Law(rhs),
                d,
                tol,
            ));
        }
    }
    Ok(InstanceResult {
        index,
        dim,
        kind,
        reports,
    })
}
