//! Derivations of outcome laws from the axioms alone.
//!
//! The outcome law is treated as an unknown vector `p` indexed by the
//! spectrum. Each applicable axiom instance contributes one or more linear
//! rows, the system is solved with a rank-revealing least-squares solve, and
//! the result is packaged as a [`DerivationCertificate`]. The Born oracle is
//! consulted only after solving, through [`oracle_law`], to fill in the
//! agreement field of a certificate.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axioms::Axiom;
use crate::error::{Error, Result};
use crate::hilbert::{conjugate_by, max_abs_diff, ComplexVector, State, C64, ZERO};
use crate::measurement::{born_law, mean, pushforward, MeasurementLaw};
use crate::observable::{
    apply_function, diagonal_phase_unitary, fmt_real, permutation_unitary, product_join,
    FunctionSpec, Observable, PermutationSpec, UnitaryMap,
};
use crate::random::{instance_rng, random_observable, random_phases, random_state};
use crate::tolerance::TolerancePolicy;

/// Singular values at or below this count as zero when ranking a system.
pub const RANK_THRESHOLD: f64 = 1e-10;
/// Largest row residual a solution may leave before the system is infeasible.
pub const RESIDUAL_LIMIT: f64 = 1e-8;
/// A unitary must fix the state to this accuracy (as a ray) to be applicable.
pub const RAY_TOLERANCE: f64 = 1e-10;
/// Probabilities below `-NEGATIVE_SLACK` in a unique solution are infeasible.
pub const NEGATIVE_SLACK: f64 = 1e-10;
/// Largest ancilla level `k` (dimension `2^k`) used by the dyadic construction.
pub const MAX_DYADIC_LEVEL: u32 = 10;
/// Largest integer window used by the mean-value chain.
pub const MAX_WINDOW: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Unknown {
    Probability { outcome: f64 },
    Mean { label: String },
}

impl fmt::Display for Unknown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unknown::Probability { outcome } => write!(f, "p({})", fmt_real(*outcome)),
            Unknown::Mean { label } => f.write_str(label),
        }
    }
}

/// Why a row is in a system: the axiom instance it comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Provenance {
    Normalization,
    /// The state is an eigenvector of `X` itself.
    Degeneracy { eigenvalue: f64 },
    /// Permutation unitary of `u` fixing the state as a ray, combined with
    /// functional invariance for the injective `u`.
    Permutation { permutation: String, ray_deviation: f64 },
    /// The state is an eigenvector of `1_S(X)`.
    Indicator {
        set: Vec<f64>,
        eigenvalue: f64,
        eigen_deviation: f64,
    },
    /// Mean form of unitary invariance for the reflection `u(x) = c − x`.
    ReflectionUnitary { map: String, ray_deviation: f64 },
    /// Mean form of functional invariance for an affine `f(x) = a·x + b`.
    AffineFunction { a: f64, b: f64 },
}

impl Provenance {
    pub fn axioms(&self) -> Vec<Axiom> {
        match self {
            Provenance::Normalization => vec![Axiom::A0],
            Provenance::Degeneracy { .. } => vec![Axiom::A1],
            Provenance::Permutation { .. } => vec![Axiom::A3Law, Axiom::A2Law],
            Provenance::Indicator { .. } => vec![Axiom::A1, Axiom::A2Law],
            Provenance::ReflectionUnitary { .. } => vec![Axiom::A3Mean],
            Provenance::AffineFunction { .. } => vec![Axiom::A2Mean],
        }
    }

    /// Whether the row uses functional invariance with a many-to-one function.
    pub fn is_many_to_one(&self) -> bool {
        matches!(self, Provenance::Indicator { .. })
    }

    pub fn justification(&self) -> String {
        match self {
            Provenance::Normalization => "outcomes lie in the spectrum (A0)".into(),
            Provenance::Degeneracy { eigenvalue } => {
                format!("A1: psi is an eigenvector of X with eigenvalue {}", fmt_real(*eigenvalue))
            }
            Provenance::Permutation { permutation, .. } => format!(
                "A3 with the permutation unitary of u = {permutation}, which fixes psi up to phase; A2 with injective u"
            ),
            Provenance::Indicator { set, eigenvalue, .. } => format!(
                "A1: psi is an eigenvector of 1_S(X) with eigenvalue {}; A2 with the many-to-one indicator of S = {{{}}}",
                fmt_real(*eigenvalue),
                set.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(", ")
            ),
            Provenance::ReflectionUnitary { map, .. } => format!(
                "A3 mean form with the permutation unitary of the reflection {map}, which fixes psi"
            ),
            Provenance::AffineFunction { a, b } => format!(
                "A2 mean form with the affine function f(x) = {}x + {}",
                fmt_real(*a),
                fmt_real(*b)
            ),
        }
    }

    /// The numerical check behind the row's applicability.
    pub fn deviation(&self) -> f64 {
        match self {
            Provenance::Permutation { ray_deviation, .. }
            | Provenance::ReflectionUnitary { ray_deviation, .. } => *ray_deviation,
            Provenance::Indicator {
                eigen_deviation, ..
            } => *eigen_deviation,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraintSystem {
    pub unknowns: Vec<Unknown>,
    pub rows: Vec<ConstraintRow>,
}

impl LinearConstraintSystem {
    pub fn new(unknowns: Vec<Unknown>) -> Self {
        Self {
            unknowns,
            rows: Vec::new(),
        }
    }

    /// One probability unknown per spectrum point.
    pub fn over_spectrum(spectrum: &[f64]) -> Self {
        Self::new(
            spectrum
                .iter()
                .map(|&outcome| Unknown::Probability { outcome })
                .collect(),
        )
    }

    pub fn push(&mut self, coefficients: Vec<f64>, rhs: f64, provenance: Provenance) -> Result<()> {
        crate::hilbert::check_dim(self.unknowns.len(), coefficients.len())?;
        if !rhs.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.rows.push(ConstraintRow {
            coefficients,
            rhs,
            provenance,
        });
        Ok(())
    }

    pub fn add_normalization(&mut self) -> Result<()> {
        self.push(vec![1.0; self.unknowns.len()], 1.0, Provenance::Normalization)
    }

    pub fn is_law_system(&self) -> bool {
        self.unknowns
            .iter()
            .all(|u| matches!(u, Unknown::Probability { .. }))
    }

    pub fn spectrum(&self) -> Vec<f64> {
        self.unknowns
            .iter()
            .filter_map(|u| match u {
                Unknown::Probability { outcome } => Some(*outcome),
                Unknown::Mean { .. } => None,
            })
            .collect()
    }

    /// `|row · values − rhs|` for every row.
    pub fn residuals(&self, values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                let lhs: f64 = r.coefficients.iter().zip(values).map(|(a, b)| a * b).sum();
                (lhs - r.rhs).abs()
            })
            .collect()
    }

    /// Human-readable form of a row, e.g. `p(0) - p(1) = 0`.
    pub fn describe_row(&self, index: usize) -> String {
        let row = &self.rows[index];
        let mut out = String::new();
        for (c, u) in row.coefficients.iter().zip(&self.unknowns) {
            if *c == 0.0 {
                continue;
            }
            let mag = c.abs();
            let sign = if *c < 0.0 { "-" } else { "+" };
            if out.is_empty() {
                if *c < 0.0 {
                    out.push('-');
                }
            } else {
                out.push_str(&format!(" {sign} "));
            }
            if mag != 1.0 {
                out.push_str(&fmt_real(mag));
            }
            out.push_str(&u.to_string());
        }
        if out.is_empty() {
            out.push('0');
        }
        format!("{out} = {}", fmt_real(row.rhs))
    }
}

/// An axiom instance offered to [`build_constraints`].
#[derive(Debug, Clone, PartialEq)]
pub enum AxiomInstance {
    Permutation(PermutationSpec),
    /// Indicator of a set of eigenvalues.
    Indicator(Vec<f64>),
}

/// Coordinates of `psi` in the eigenbasis of a nondegenerate observable.
fn eigen_coordinates(x: &Observable, psi: &State) -> Vec<C64> {
    (0..x.len())
        .map(|i| (x.eigenspace(i).adjoint() * psi.vector())[0])
        .collect()
}

/// Distance from `b` to the closest `e^{iθ} a`, for coordinate vectors of unit norm.
fn ray_gap(a: &[C64], b: &[C64]) -> f64 {
    let overlap: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| (y - phase * x).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Turns applicable axiom instances into constraint rows on the law of `X`
/// in state `psi`. Permutation instances are evaluated in the eigenbasis of
/// `X`, where the unitary `U|X=x⟩ = |X=u(x)⟩` just permutes coordinates.
/// A normalization row always comes first.
pub fn build_constraints(
    psi: &State,
    x: &Observable,
    instances: &[AxiomInstance],
    tol: &TolerancePolicy,
) -> Result<LinearConstraintSystem> {
    crate::hilbert::check_dim(x.dim(), psi.dim())?;
    let spectrum = x.eigenvalues();
    let n = spectrum.len();
    let mut sys = LinearConstraintSystem::over_spectrum(spectrum);
    sys.add_normalization()?;
    let coords = if x.is_nondegenerate() {
        Some(eigen_coordinates(x, psi))
    } else {
        None
    };
    for instance in instances {
        match instance {
            AxiomInstance::Permutation(u) => {
                let coords = coords.as_ref().ok_or(Error::Degenerate)?;
                if u.domain().len() != n
                    || !u
                        .domain()
                        .iter()
                        .zip(spectrum)
                        .all(|(&a, &b)| tol.same_value(a, b))
                {
                    return Err(Error::NotBijection);
                }
                let mut moved = vec![ZERO; n];
                for (i, c) in coords.iter().enumerate() {
                    moved[u.image_index(i)] = *c;
                }
                let ray_deviation = ray_gap(coords, &moved);
                if ray_deviation > RAY_TOLERANCE {
                    return Err(Error::InstanceNotApplicable(format!(
                        "permutation {} moves psi by {ray_deviation:e}",
                        u.describe()
                    )));
                }
                for cycle in u.cycles() {
                    for w in cycle.windows(2) {
                        let mut row = vec![0.0; n];
                        row[w[0]] += 1.0;
                        row[w[1]] -= 1.0;
                        sys.push(
                            row,
                            0.0,
                            Provenance::Permutation {
                                permutation: u.describe(),
                                ray_deviation,
                            },
                        )?;
                    }
                }
            }
            AxiomInstance::Indicator(set) => {
                let mut members = Vec::with_capacity(set.len());
                for &s in set {
                    let i = x.index_of(s, tol).ok_or_else(|| {
                        Error::Precondition(format!("{} is not an eigenvalue", fmt_real(s)))
                    })?;
                    if !members.contains(&i) {
                        members.push(i);
                    }
                }
                let mut image = DVector::from_element(psi.dim(), ZERO);
                for &i in &members {
                    image += x.project(i, psi.vector());
                }
                // 1_S(X) has eigenvalues 0 and 1; pick the one psi would have.
                let rayleigh = psi.vector().dotc(&image).re;
                let eigenvalue = if rayleigh >= 0.5 { 1.0 } else { 0.0 };
                let eigen_deviation = (&image - psi.vector() * C64::new(eigenvalue, 0.0)).norm();
                if eigen_deviation > RAY_TOLERANCE {
                    return Err(Error::InstanceNotApplicable(format!(
                        "psi is not an eigenvector of the indicator (deviation {eigen_deviation:e})"
                    )));
                }
                let mut row = vec![0.0; n];
                for &i in &members {
                    row[i] = 1.0;
                }
                let mut sorted: Vec<f64> = members.iter().map(|&i| spectrum[i]).collect();
                sorted.sort_by(f64::total_cmp);
                sys.push(
                    row,
                    eigenvalue,
                    Provenance::Indicator {
                        set: sorted,
                        eigenvalue,
                        eigen_deviation,
                    },
                )?;
            }
        }
    }
    Ok(sys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    Unique,
    Underdetermined(usize),
}

impl fmt::Display for Uniqueness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Uniqueness::Unique => f.write_str("unique"),
            Uniqueness::Underdetermined(k) => write!(f, "underdetermined({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Minimum-norm least-squares solution.
    pub values: Vec<f64>,
    pub uniqueness: Uniqueness,
    /// Unit vectors spanning the nullspace, in unknown coordinates.
    pub nullspace: Vec<Vec<f64>>,
    pub residual: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Rows of the form `u_a − u_b = 0`.
fn equality_pair(row: &ConstraintRow) -> Option<(usize, usize)> {
    if row.rhs != 0.0 {
        return None;
    }
    let mut plus = None;
    let mut minus = None;
    for (i, &c) in row.coefficients.iter().enumerate() {
        match c {
            0.0 => {}
            1.0 if plus.is_none() => plus = Some(i),
            -1.0 if minus.is_none() => minus = Some(i),
            _ => return None,
        }
    }
    plus.zip(minus)
}

/// Rank-revealing least-squares solve.
///
/// Equality rows `u_a − u_b = 0` are eliminated first by merging unknowns
/// into classes; the remaining rows are solved by SVD over the classes.
/// Singular values at or below [`RANK_THRESHOLD`] count as zero.
pub fn solve_system(sys: &LinearConstraintSystem) -> Result<Solution> {
    let n = sys.unknowns.len();
    if n == 0 || sys.rows.is_empty() {
        return Err(Error::Precondition("empty constraint system".into()));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut merged = vec![false; sys.rows.len()];
    for (r, row) in sys.rows.iter().enumerate() {
        if let Some((a, b)) = equality_pair(row) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
            merged[r] = true;
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut class_of = vec![usize::MAX; n];
    let mut classes = 0;
    for i in 0..n {
        if roots[i] == i {
            class_of[i] = classes;
            classes += 1;
        }
    }
    let class: Vec<usize> = (0..n).map(|i| class_of[roots[i]]).collect();

    let kept: Vec<&ConstraintRow> = sys
        .rows
        .iter()
        .zip(&merged)
        .filter(|(_, m)| !**m)
        .map(|(r, _)| r)
        .collect();
    let height = kept.len().max(classes);
    let mut a = DMatrix::<f64>::zeros(height, classes);
    let mut b = DVector::<f64>::zeros(height);
    for (r, row) in kept.iter().enumerate() {
        for (i, &c) in row.coefficients.iter().enumerate() {
            a[(r, class[i])] += c;
        }
        b[r] = row.rhs;
    }
    let svd = a.svd(true, true);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_THRESHOLD)
        .count();
    let reduced = svd
        .solve(&b, RANK_THRESHOLD)
        .map_err(|e| Error::Precondition(e.to_string()))?;
    let mut values: Vec<f64> = (0..n).map(|i| reduced[class[i]]).collect();
    let residual = sys.residuals(&values).into_iter().fold(0.0, f64::max);
    if residual > RESIDUAL_LIMIT {
        return Err(Error::Infeasible { residual });
    }
    let v_t = svd.v_t.as_ref().expect("requested V");
    let nullspace: Vec<Vec<f64>> = (0..classes)
        .filter(|&j| svd.singular_values[j] <= RANK_THRESHOLD)
        .map(|j| {
            let v: Vec<f64> = (0..n).map(|i| v_t[(j, class[i])]).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let uniqueness = if rank == classes {
        Uniqueness::Unique
    } else {
        Uniqueness::Underdetermined(classes - rank)
    };
    if uniqueness == Uniqueness::Unique && sys.is_law_system() {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -NEGATIVE_SLACK {
            return Err(Error::Infeasible { residual: -min });
        }
        for v in values.iter_mut() {
            *v = v.max(0.0);
        }
    }
    Ok(Solution {
        values,
        uniqueness,
        nullspace,
        residual,
    })
}

/// Solves a law system; the law is present only when it is unique.
pub fn solve_law(
    sys: &LinearConstraintSystem,
    tol: &TolerancePolicy,
) -> Result<(Option<MeasurementLaw>, Uniqueness)> {
    if !sys.is_law_system() {
        return Err(Error::Precondition("system has non-probability unknowns".into()));
    }
    let solution = solve_system(sys)?;
    let law = match solution.uniqueness {
        Uniqueness::Unique => Some(MeasurementLaw::new(sys.spectrum(), solution.values, tol)?),
        Uniqueness::Underdetermined(_) => None,
    };
    Ok((law, solution.uniqueness))
}

/// The Born law, used only to report how a derived result compares with it.
/// This is the single entry point into the Born oracle from this module.
pub fn oracle_law(psi: &State, x: &Observable, tol: &TolerancePolicy) -> Result<MeasurementLaw> {
    born_law(psi, x, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    EqualWeightPair,
    EqualWeightM,
    MeanAffine,
    Dyadic,
    RealLimit,
    PhaseStrip,
    ShiftDemo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub claim: String,
    pub justification: String,
    pub discrepancy: f64,
}

impl Step {
    pub fn new(claim: impl Into<String>, justification: impl Into<String>, discrepancy: f64) -> Self {
        Self {
            claim: claim.into(),
            justification: justification.into(),
            discrepancy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationCertificate {
    pub case: Case,
    pub steps: Vec<Step>,
    pub system: Option<LinearConstraintSystem>,
    pub solved_law: Option<MeasurementLaw>,
    pub solved_mean: Option<f64>,
    pub uniqueness: Option<Uniqueness>,
    /// The uniqueness outcome this derivation is expected to reach.
    pub expected_uniqueness: Option<Uniqueness>,
    pub nullspace: Vec<Vec<f64>>,
    /// Sup-distance between the derived result and the Born oracle.
    pub oracle_agreement: Option<f64>,
    pub notes: Vec<String>,
}

impl DerivationCertificate {
    fn empty(case: Case) -> Self {
        Self {
            case,
            steps: Vec::new(),
            system: None,
            solved_law: None,
            solved_mean: None,
            uniqueness: None,
            expected_uniqueness: None,
            nullspace: Vec::new(),
            oracle_agreement: None,
            notes: Vec::new(),
        }
    }

    pub fn max_step_discrepancy(&self) -> f64 {
        self.steps.iter().map(|s| s.discrepancy).fold(0.0, f64::max)
    }

    /// Largest discrepancy the certificate reports, oracle included.
    pub fn max_discrepancy(&self) -> f64 {
        self.max_step_discrepancy()
            .max(self.oracle_agreement.unwrap_or(0.0))
    }

    /// Every step and the oracle comparison within `tol_law`, and the
    /// uniqueness outcome as expected.
    pub fn pass(&self, tol: &TolerancePolicy) -> bool {
        let uniqueness_ok = match (self.expected_uniqueness, self.uniqueness) {
            (Some(e), Some(u)) => e == u,
            (Some(_), None) => false,
            (None, _) => true,
        };
        uniqueness_ok && self.max_discrepancy() <= tol.tol_law
    }

    /// Row provenances, in row order.
    pub fn provenance(&self) -> Vec<&Provenance> {
        self.system
            .iter()
            .flat_map(|s| s.rows.iter().map(|r| &r.provenance))
            .collect()
    }
}

fn row_steps(sys: &LinearConstraintSystem) -> Vec<Step> {
    (0..sys.rows.len())
        .map(|r| {
            let p = &sys.rows[r].provenance;
            Step::new(sys.describe_row(r), p.justification(), p.deviation())
        })
        .collect()
}

fn solution_step(solution: &Solution) -> Step {
    Step::new(
        format!("solution of the constraint system: {}", solution.uniqueness),
        format!(
            "rank-revealing least squares, singular values <= {RANK_THRESHOLD:e} treated as zero"
        ),
        solution.residual,
    )
}

/// Which permutations [`derive_equal_weight_with`] offers as axiom instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationFamily {
    /// Every transposition within the support and within its complement.
    Transpositions,
    /// A single permutation cycling the support and cycling its complement.
    Cycles,
}

/// Derives the law of an equal-weight superposition over `support` using
/// [`PermutationFamily::Transpositions`].
pub fn derive_equal_weight(
    support: &[f64],
    x: &Observable,
    psi: &State,
    tol: &TolerancePolicy,
) -> Result<DerivationCertificate> {
    derive_equal_weight_with(support, x, psi, PermutationFamily::Transpositions, tol)
}

pub fn derive_equal_weight_with(
    support: &[f64],
    x: &Observable,
    psi: &State,
    family: PermutationFamily,
    tol: &TolerancePolicy,
) -> Result<DerivationCertificate> {
    if support.is_empty() {
        return Err(Error::Precondition("empty support".into()));
    }
    if !x.is_nondegenerate() {
        return Err(Error::Degenerate);
    }
    let spectrum = x.eigenvalues();
    let mut inside = Vec::with_capacity(support.len());
    for &s in support {
        let i = x
            .index_of(s, tol)
            .ok_or_else(|| Error::Precondition(format!("{} is not an eigenvalue", fmt_real(s))))?;
        if inside.contains(&i) {
            return Err(Error::Precondition(format!("{} listed twice", fmt_real(s))));
        }
        inside.push(i);
    }
    inside.sort_unstable();
    let outside: Vec<usize> = (0..spectrum.len()).filter(|i| !inside.contains(i)).collect();

    let mut instances = Vec::new();
    match family {
        PermutationFamily::Transpositions => {
            for group in [&inside, &outside] {
                for (a, &i) in group.iter().enumerate() {
                    for &j in &group[a + 1..] {
                        instances.push(AxiomInstance::Permutation(PermutationSpec::transposition(
                            spectrum,
                            spectrum[i],
                            spectrum[j],
                            tol,
                        )?));
                    }
                }
            }
        }
        PermutationFamily::Cycles => {
            let cycles: Vec<Vec<f64>> = [&inside, &outside]
                .iter()
                .filter(|g| g.len() > 1)
                .map(|g| g.iter().map(|&i| spectrum[i]).collect())
                .collect();
            if !cycles.is_empty() {
                instances.push(AxiomInstance::Permutation(PermutationSpec::from_cycles(
                    spectrum, &cycles, tol,
                )?));
            }
        }
    }
    instances.push(AxiomInstance::Indicator(
        inside.iter().map(|&i| spectrum[i]).collect(),
    ));

    let sys = build_constraints(psi, x, &instances, tol)?;
    let solution = solve_system(&sys)?;
    let mut cert = DerivationCertificate::empty(if inside.len() == 2 {
        Case::EqualWeightPair
    } else {
        Case::EqualWeightM
    });
    cert.steps = row_steps(&sys);
    cert.steps.push(solution_step(&solution));
    cert.uniqueness = Some(solution.uniqueness);
    cert.expected_uniqueness = Some(Uniqueness::Unique);
    cert.nullspace = solution.nullspace.clone();
    if solution.uniqueness == Uniqueness::Unique {
        let law = MeasurementLaw::new(sys.spectrum(), solution.values, tol)?;
        cert.oracle_agreement = Some(law.sup_distance(&oracle_law(psi, x, tol)?, tol));
        cert.solved_law = Some(law);
    }
    cert.system = Some(sys);
    Ok(cert)
}

/// The equal-weight superposition of the eigenvectors for `support`.
pub fn equal_weight_state(support: &[f64], x: &Observable, tol: &TolerancePolicy) -> Result<State> {
    if support.is_empty() {
        return Err(Error::Precondition("empty support".into()));
    }
    let mut v = DVector::from_element(x.dim(), ZERO);
    for &s in support {
        let i = x
            .index_of(s, tol)
            .ok_or_else(|| Error::Precondition(format!("{} is not an eigenvalue", fmt_real(s))))?;
        v += x.eigenvector(i)?.vector();
    }
    crate::hilbert::normalize(&ComplexVector::new(v)?, tol)
}

/// Mean-value chain for `psi = (|x1⟩ + |x2⟩)/√2` on an integer window
/// symmetric about `(x1+x2)/2`, using only the reflection unitary and an
/// affine function.
pub fn derive_mean_affine(x1: f64, x2: f64, tol: &TolerancePolicy) -> Result<DerivationCertificate> {
    if !x1.is_finite() || !x2.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut cert = DerivationCertificate::empty(Case::MeanAffine);
    cert.expected_uniqueness = Some(Uniqueness::Unique);
    let e = Unknown::Mean {
        label: "E[X; psi]".into(),
    };
    if x1 == x2 {
        let x = Observable::from_diagonal(&[x1], tol)?;
        let psi = x.eigenvector(0)?;
        let mut sys = LinearConstraintSystem::new(vec![e]);
        sys.push(vec![1.0], x1, Provenance::Degeneracy { eigenvalue: x1 })?;
        let solution = solve_system(&sys)?;
        cert.steps = row_steps(&sys);
        cert.steps.push(solution_step(&solution));
        cert.solved_mean = Some(solution.values[0]);
        cert.solved_law = Some(MeasurementLaw::point_mass(x1));
        cert.uniqueness = Some(solution.uniqueness);
        cert.oracle_agreement = Some((solution.values[0] - mean(&oracle_law(&psi, &x, tol)?)).abs());
        cert.system = Some(sys);
        return Ok(cert);
    }
    let diff = x2 - x1;
    if (diff - diff.round()).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "{} and {} are not an integer distance apart",
            fmt_real(x1),
            fmt_real(x2)
        )));
    }
    let steps_apart = diff.round().abs() as usize;
    let half_width = steps_apart as f64 / 2.0 + 2.0;
    let (lo, hi) = (x1.min(x2), x1.max(x2));
    let window: Vec<f64> = (-2..=(steps_apart as i64 + 2))
        .map(|n| lo + n as f64)
        .collect();
    if window.len() > MAX_WINDOW {
        return Err(Error::Precondition(format!(
            "window of {} points exceeds {MAX_WINDOW}",
            window.len()
        )));
    }
    let centre = 0.5 * (x1 + x2);
    debug_assert!(window
        .iter()
        .all(|w| (w - centre).abs() <= half_width + 1e-9));
    let sum = x1 + x2;
    let x = Observable::from_diagonal(&window, tol)?;
    let reflection: Vec<f64> = window.iter().rev().copied().collect();
    let u = PermutationSpec::new(&window, &reflection, tol)?;
    let unitary = permutation_unitary(&x, &u, tol)?;
    let (i1, i2) = (2, 2 + steps_apart);
    let psi = equal_weight_state(&[lo, hi], &x, tol)?;

    let moved = unitary.apply(&psi, tol)?;
    let fixed = (moved.vector() - psi.vector()).norm();
    let conj = conjugate_by(unitary.matrix(), &x.matrix(), tol)?;
    let affine = FunctionSpec::affine(&window, -1.0, sum)?;
    let reflected = apply_function(&x, &affine, tol)?;
    let identity_gap = max_abs_diff(conj.matrix(), reflected.matrix().matrix());
    let table_gap = affine
        .table()
        .iter()
        .zip(u.as_function().table())
        .map(|((_, a), (_, b))| (a - b).abs())
        .fold(0.0, f64::max);
    let map = format!("x -> {} - x", fmt_real(sum));

    let e_u = Unknown::Mean {
        label: "E[u(X); psi]".into(),
    };
    let mut sys = LinearConstraintSystem::new(vec![e, e_u]);
    sys.push(
        vec![1.0, -1.0],
        0.0,
        Provenance::ReflectionUnitary {
            map: map.clone(),
            ray_deviation: fixed,
        },
    )?;
    sys.push(
        vec![1.0, 1.0],
        sum,
        Provenance::AffineFunction { a: -1.0, b: sum },
    )?;
    let solution = solve_system(&sys)?;
    let value = solution.values[0];

    cert.steps = vec![
        Step::new(
            "E[X; psi] = E[X; U psi]",
            format!("U psi = psi for the permutation unitary U of the reflection {map}"),
            fixed,
        ),
        Step::new(
            "E[X; U psi] = E[U^dag X U; psi]",
            "A3 mean form",
            unitary.matrix().unitarity_deviation(),
        ),
        Step::new(
            format!("U^dag X U = u(X) = {} - X", fmt_real(sum)),
            "U maps each eigenvector |X=x> to |X=u(x)>",
            identity_gap,
        ),
        Step::new(
            format!("E[{} - X; psi] = {} - E[X; psi]", fmt_real(sum), fmt_real(sum)),
            "A2 mean form with the affine function f(x) = -x + c, which agrees with u on the window",
            table_gap,
        ),
        Step::new(
            format!("E[X; psi] = {} - E[X; psi], so E[X; psi] = {}", fmt_real(sum), fmt_real(value)),
            "combine the rows and solve",
            solution.residual,
        ),
    ];
    cert.notes.push(format!(
        "integer window {}..={} of {} points, symmetric about {}; |X=x1> and |X=x2> sit at positions {i1} and {i2}",
        fmt_real(window[0]),
        fmt_real(window[window.len() - 1]),
        window.len(),
        fmt_real(centre)
    ));
    cert.solved_mean = Some(value);
    cert.uniqueness = Some(solution.uniqueness);
    cert.oracle_agreement = Some((value - mean(&oracle_law(&psi, &x, tol)?)).abs());
    cert.system = Some(sys);
    Ok(cert)
}

/// `√w |X=x1⟩ + √(1−w) |X=x2⟩`.
pub fn two_level_state(
    w: f64,
    x1: f64,
    x2: f64,
    x: &Observable,
    tol: &TolerancePolicy,
) -> Result<State> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Precondition(format!("weight {w} outside [0, 1]")));
    }
    let (i1, i2) = two_indices(x, x1, x2, tol)?;
    let v = x.eigenvector(i1)?.vector() * C64::new(w.sqrt(), 0.0)
        + x.eigenvector(i2)?.vector() * C64::new((1.0 - w).sqrt(), 0.0);
    crate::hilbert::normalize(&ComplexVector::new(v)?, tol)
}

fn two_indices(x: &Observable, x1: f64, x2: f64, tol: &TolerancePolicy) -> Result<(usize, usize)> {
    if !x.is_nondegenerate() {
        return Err(Error::Degenerate);
    }
    let find = |v: f64| {
        x.index_of(v, tol)
            .ok_or_else(|| Error::Precondition(format!("{} is not an eigenvalue", fmt_real(v))))
    };
    let (i1, i2) = (find(x1)?, find(x2)?);
    if i1 == i2 {
        return Err(Error::Precondition("x1 and x2 must differ".into()));
    }
    Ok((i1, i2))
}

/// Unit vector with equal real entries on `range` of an `n`-dimensional space.
fn flat_block(n: usize, range: std::ops::Range<usize>) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    let len = range.len();
    for j in range {
        v[j] = 1.0 / (len as f64).sqrt();
    }
    v
}

/// Householder reflection data for the map `e_0 ↦ a`: returns `W e_0` and
/// the Frobenius unitarity deviation of `W = I − 2 n nᵀ`.
fn householder_image(a: &DVector<f64>) -> (DVector<f64>, f64) {
    let mut w = -a.clone();
    w[0] += 1.0;
    let norm = w.norm();
    if norm <= 1e-15 {
        return (a.clone(), 0.0);
    }
    let unit = &w / norm;
    let n2 = unit.norm_squared();
    // (I − 2nnᵀ)ᵀ(I − 2nnᵀ) − I = 4(‖n‖² − 1) nnᵀ.
    let deviation = 4.0 * (n2 - 1.0).abs() * n2;
    let mut image = DVector::zeros(a.len());
    image[0] = 1.0;
    image -= &unit * (2.0 * unit[0]);
    (image, deviation)
}

/// Law of `√(m/2^k)|x1⟩ + √(1−m/2^k)|x2⟩` via an ancilla of dimension `2^k`.
pub fn derive_dyadic(
    m: u64,
    k: u32,
    x1: f64,
    x2: f64,
    x: &Observable,
    tol: &TolerancePolicy,
) -> Result<DerivationCertificate> {
    if k > MAX_DYADIC_LEVEL {
        return Err(Error::Precondition(format!(
            "ancilla level {k} exceeds {MAX_DYADIC_LEVEL}"
        )));
    }
    let big_n = 1usize << k;
    if m as usize > big_n {
        return Err(Error::Precondition(format!("m = {m} exceeds 2^{k}")));
    }
    let m = m as usize;
    let (i1, i2) = two_indices(x, x1, x2, tol)?;
    let w = m as f64 / big_n as f64;
    let psi = two_level_state(w, x1, x2, x, tol)?;

    let ancilla_values: Vec<f64> = (0..big_n).map(|j| j as f64).collect();
    let y = Observable::from_diagonal(&ancilla_values, tol)?;
    let joint = product_join(x, &y);
    let d = x.dim();
    let label = |i: usize, j: usize| i * big_n + j;

    // V = Σ_x [X=x] ⊗ W_x, with W_{x1} e_0 flat on j < m and W_{x2} e_0 flat on j ≥ m.
    let block_1 = flat_block(big_n, 0..m);
    let block_2 = flat_block(big_n, m..big_n);
    let coords = eigen_coordinates(x, &psi);
    let mut unitary_gap: f64 = 0.0;
    let mut phi = DVector::from_element(d * big_n, ZERO);
    for (i, block) in [(i1, &block_1), (i2, &block_2)] {
        if block.norm() == 0.0 {
            continue;
        }
        let (image, dev) = householder_image(block);
        unitary_gap = unitary_gap.max(dev);
        let ancilla = image.map(|v| C64::new(v, 0.0));
        phi += x.eigenvector(i)?.vector().kronecker(&ancilla) * coords[i];
    }
    let support: Vec<f64> = (0..m)
        .map(|j| label(i1, j))
        .chain((m..big_n).map(|j| label(i2, j)))
        .map(|l| l as f64)
        .collect();
    let mut target = DVector::from_element(d * big_n, ZERO);
    for &l in &support {
        target += joint.z.eigenvector(l as usize)?.vector();
    }
    target /= C64::new((big_n as f64).sqrt(), 0.0);
    let phi_gap = (&phi - &target).norm();
    let phi = crate::hilbert::normalize(&ComplexVector::new(phi)?, tol)?;

    let inner = derive_equal_weight_with(&support, &joint.z, &phi, PermutationFamily::Cycles, tol)?;

    let mut cert = DerivationCertificate::empty(Case::Dyadic);
    cert.expected_uniqueness = Some(Uniqueness::Unique);
    cert.steps.push(Step::new(
        "law(X; psi) = law(X (x) 1; psi (x) |0>)",
        "product assumption: adjoining an ancilla prepared in the eigenstate |Y=0> leaves the law of X unchanged",
        0.0,
    ));
    cert.steps.push(Step::new(
        format!("V = sum_x [X=x] (x) W_x is unitary on C^{d} (x) C^{big_n}"),
        "each W_x is a Householder reflection",
        unitary_gap,
    ));
    cert.steps.push(Step::new(
        "law(X (x) 1; psi (x) |0>) = law(X (x) 1; V(psi (x) |0>))",
        "A3: V is block diagonal in the eigenspaces of X (x) 1, so V^dag (X (x) 1) V = X (x) 1",
        0.0,
    ));
    cert.steps.push(Step::new(
        format!(
            "V(psi (x) |0>) is the equal-weight superposition of {big_n} joint eigenstates, {m} with X = {}",
            fmt_real(x1)
        ),
        "direct evaluation",
        phi_gap,
    ));
    cert.steps.push(Step::new(
        "law(X (x) 1) is the pushforward of the joint law of (X, Y) under g(x, y) = x",
        "A2 for the compatible pair (X (x) 1, 1 (x) Y) through their join Z",
        0.0,
    ));
    for s in &inner.steps {
        cert.steps.push(Step::new(
            format!("joint: {}", s.claim),
            s.justification.clone(),
            s.discrepancy,
        ));
    }
    cert.uniqueness = inner.uniqueness;
    cert.nullspace = inner.nullspace.clone();
    if let Some(joint_law) = &inner.solved_law {
        let law = pushforward(joint_law, &joint.coordinate(0), tol)?;
        cert.oracle_agreement = Some(law.sup_distance(&oracle_law(&psi, x, tol)?, tol));
        cert.solved_law = Some(law);
    }
    cert.notes.push(format!(
        "ancilla dimension 2^{k} = {big_n}; joint equal-weight support of {} labels",
        support.len()
    ));
    cert.system = inner.system;
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealLimitEntry {
    pub level: u32,
    pub numerator: u64,
    pub dyadic: f64,
    /// `|w_k − w|`.
    pub rounding_gap: f64,
    /// Sup-distance between the derived dyadic law and the Born law at `w`.
    pub law_gap: f64,
    /// `2|w_k − w| + 1e-10`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealLimitReport {
    pub target: f64,
    pub entries: Vec<RealLimitEntry>,
    pub certificates: Vec<DerivationCertificate>,
}

impl RealLimitReport {
    pub fn within_bounds(&self) -> bool {
        self.entries.iter().all(|e| e.law_gap <= e.bound)
    }
}

/// Runs [`derive_dyadic`] on `w_k = round(w·2^k)/2^k` for `k = 0, 1, …`
/// until `|w_k − w| ≤ gap_tol`.
pub fn approximate_real(
    w: f64,
    gap_tol: f64,
    x1: f64,
    x2: f64,
    x: &Observable,
    tol: &TolerancePolicy,
) -> Result<RealLimitReport> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Precondition(format!("weight {w} outside [0, 1]")));
    }
    if !(gap_tol >= 0.0) {
        return Err(Error::Precondition("gap tolerance must be nonnegative".into()));
    }
    let truth = oracle_law(&two_level_state(w, x1, x2, x, tol)?, x, tol)?;
    let mut report = RealLimitReport {
        target: w,
        entries: Vec::new(),
        certificates: Vec::new(),
    };
    for k in 0..=MAX_DYADIC_LEVEL {
        let scale = (1u64 << k) as f64;
        let numerator = (w * scale).round() as u64;
        let dyadic = numerator as f64 / scale;
        let rounding_gap = (dyadic - w).abs();
        let mut cert = derive_dyadic(numerator, k, x1, x2, x, tol)?;
        cert.case = Case::RealLimit;
        let law_gap = cert
            .solved_law
            .as_ref()
            .map_or(f64::INFINITY, |l| l.sup_distance(&truth, tol));
        cert.notes.push(format!(
            "level {k}: w_k = {numerator}/{} approximates w = {} within {rounding_gap:e}; derived law within {law_gap:e} of the law at w",
            1u64 << k,
            fmt_real(w)
        ));
        report.entries.push(RealLimitEntry {
            level: k,
            numerator,
            dyadic,
            rounding_gap,
            law_gap,
            bound: 2.0 * rounding_gap + 1e-10,
        });
        report.certificates.push(cert);
        if rounding_gap <= gap_tol {
            return Ok(report);
        }
    }
    Err(Error::Precondition(format!(
        "gap {gap_tol:e} not reached by level {MAX_DYADIC_LEVEL}"
    )))
}

/// Removes the phases of `psi` in the eigenbasis of `X` with a diagonal
/// unitary, returning the stripped state, the unitary and a certificate
/// that the law of `X` is unchanged.
pub fn strip_phases(
    psi: &State,
    x: &Observable,
    tol: &TolerancePolicy,
) -> Result<(State, UnitaryMap, DerivationCertificate)> {
    crate::hilbert::check_dim(x.dim(), psi.dim())?;
    if !x.is_nondegenerate() {
        return Err(Error::Degenerate);
    }
    let coords = eigen_coordinates(x, psi);
    let phases = FunctionSpec::from_pairs(
        x.eigenvalues()
            .iter()
            .zip(&coords)
            .map(|(&e, c)| (e, if c.norm() > 0.0 { -c.arg() } else { 0.0 })),
    )?;
    let u = diagonal_phase_unitary(x, &phases, tol)?;
    let stripped = u.apply(psi, tol)?;
    let new_coords = eigen_coordinates(x, &stripped);
    let sign_gap = new_coords
        .iter()
        .map(|c| c.im.abs().max(-c.re))
        .fold(0.0, f64::max);
    let xm = x.matrix();
    let commute_gap = max_abs_diff(conjugate_by(u.matrix(), &xm, tol)?.matrix(), xm.matrix());

    let mut cert = DerivationCertificate::empty(Case::PhaseStrip);
    cert.steps = vec![
        Step::new(
            "U = sum_x exp(i phi(x)) [X=x] satisfies U^dag X U = X",
            "U is diagonal in the eigenbasis of X",
            commute_gap,
        ),
        Step::new(
            "psi' = U psi has nonnegative real amplitudes on every |X=x>",
            "phi(x) = -arg <X=x|psi>",
            sign_gap,
        ),
        Step::new(
            "law(X; psi') = law(U^dag X U; psi) = law(X; psi)",
            "A3 with the diagonal unitary U",
            commute_gap,
        ),
    ];
    let before = oracle_law(psi, x, tol)?;
    let after = oracle_law(&stripped, x, tol)?;
    cert.oracle_agreement = Some(before.sup_distance(&after, tol));
    cert.solved_law = Some(after);
    Ok((stripped, u, cert))
}

/// The finite shift construction on `X = diag(0, …, d−1)` with
/// `psi = (|0⟩ + |1⟩)/√2`: the swap of 0 and 1 combined with a cycle of the
/// remaining values. Without the indicator row for `{0, 1}` one degree of
/// freedom stays open.
pub fn shift_demo(
    d: usize,
    with_indicator: bool,
    tol: &TolerancePolicy,
) -> Result<DerivationCertificate> {
    if d < 4 {
        return Err(Error::Precondition(format!(
            "the shift construction needs d >= 4, got {d}"
        )));
    }
    let values: Vec<f64> = (0..d).map(|i| i as f64).collect();
    let x = Observable::from_diagonal(&values, tol)?;
    let psi = equal_weight_state(&[0.0, 1.0], &x, tol)?;
    let rest: Vec<f64> = values[2..].to_vec();
    let u = PermutationSpec::from_cycles(&values, &[vec![0.0, 1.0], rest], tol)?;
    let mut instances = vec![AxiomInstance::Permutation(u)];
    if with_indicator {
        instances.push(AxiomInstance::Indicator(vec![0.0, 1.0]));
    }
    let sys = build_constraints(&psi, &x, &instances, tol)?;
    let solution = solve_system(&sys)?;

    let mut cert = DerivationCertificate::empty(Case::ShiftDemo);
    cert.steps = row_steps(&sys);
    cert.steps.push(solution_step(&solution));
    cert.uniqueness = Some(solution.uniqueness);
    cert.expected_uniqueness = Some(if with_indicator {
        Uniqueness::Unique
    } else {
        Uniqueness::Underdetermined(1)
    });
    cert.nullspace = solution.nullspace.clone();
    match solution.uniqueness {
        Uniqueness::Unique => {
            let law = MeasurementLaw::new(sys.spectrum(), solution.values, tol)?;
            cert.oracle_agreement = Some(law.sup_distance(&oracle_law(&psi, &x, tol)?, tol));
            cert.solved_law = Some(law);
            cert.notes.push(
                "the indicator row for {0, 1} fixes p(0) + p(1) = 1 and the law is unique".into(),
            );
        }
        Uniqueness::Underdetermined(k) => {
            cert.notes.push(format!(
                "permutation rows and normalization leave {k} free parameter: p(0) = p(1) = t and p(j) = (1 - 2t)/{} for j >= 2",
                d - 2
            ));
            cert.notes.push(
                "with finitely many outcomes the cycle cannot force the remaining mass to zero; the indicator row for {0, 1} closes the gap"
                    .into(),
            );
        }
    }
    cert.system = Some(sys);
    Ok(cert)
}

/// Random states, nondegenerate observables and phase assignments: returns
/// the law discrepancy after [`strip_phases`] for each trial, in trial order.
pub fn phase_invariance_scan(
    trials: usize,
    seed: u64,
    min_dim: usize,
    max_dim: usize,
    tol: &TolerancePolicy,
) -> Result<Vec<f64>> {
    if min_dim < 1 || max_dim < min_dim {
        return Err(Error::Precondition(format!(
            "invalid dimension range {min_dim}..={max_dim}"
        )));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = instance_rng(seed, t as u64);
            let d = rng.random_range(min_dim..=max_dim);
            let x = random_observable(d, false, &mut rng);
            let psi = random_state(d, &mut rng);
            let phases = random_phases(x.eigenvalues(), &mut rng);
            let phased = diagonal_phase_unitary(&x, &phases, tol)?.apply(&psi, tol)?;
            let (_, _, cert) = strip_phases(&phased, &x, tol)?;
            Ok(cert.oracle_agreement.unwrap_or(f64::INFINITY))
        })
        .collect()
}
