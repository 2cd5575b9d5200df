//! Frame functions on projectors and reconstruction of the density matrix
//! that generates them.
//!
//! Reconstruction is a linear inverse problem: expand `ρ` in an orthonormal
//! basis of hermitian matrices (real inner product `Re tr(AB)`), impose
//! `tr(ρ P_i) = p_i` for every assignment plus `tr ρ = 1`, and solve by
//! least squares.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::axioms::{Axiom, CheckReport, Side};
use crate::error::{Error, Result};
use crate::hilbert::{check_dim, max_abs_diff, State, C64, ONE, ZERO};
use crate::tolerance::TolerancePolicy;

/// Eigenvalues of a reconstruction below this are an inconsistent frame.
pub const PSD_FAILURE: f64 = -1e-6;
/// Eigenvalues in `[PSD_FAILURE, PSD_SLACK)` are clipped to zero.
pub const PSD_SLACK: f64 = -1e-9;
/// Maximum least-squares residual accepted by [`reconstruct_density`].
pub const RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<C64>,
    rank: usize,
}

impl Projector {
    pub fn new(matrix: DMatrix<C64>, tol: &TolerancePolicy) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let herm = max_abs_diff(&matrix, &matrix.adjoint());
        if herm > tol.tol_herm {
            return Err(Error::NotProjector(format!("hermiticity deviation {herm:e}")));
        }
        let idem = max_abs_diff(&(&matrix * &matrix), &matrix);
        if idem > tol.tol_herm {
            return Err(Error::NotProjector(format!("idempotence deviation {idem:e}")));
        }
        let rank = matrix.trace().re.round().max(0.0) as usize;
        Ok(Self { matrix, rank })
    }

    /// `|v⟩⟨v| / ⟨v|v⟩`.
    pub fn onto(v: &DVector<C64>) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let u = v / C64::new(n, 0.0);
        Ok(Self {
            matrix: &u * u.adjoint(),
            rank: 1,
        })
    }

    /// Projector onto the span of orthonormal columns.
    pub fn onto_columns(basis: &DMatrix<C64>, tol: &TolerancePolicy) -> Result<Self> {
        let gram = basis.adjoint() * basis;
        let deviation = max_abs_diff(&gram, &DMatrix::identity(basis.ncols(), basis.ncols()));
        if deviation > tol.tol_norm {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self {
            matrix: basis * basis.adjoint(),
            rank: basis.ncols(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            rank: dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// `U P U†`.
    pub fn conjugated(&self, u: &DMatrix<C64>) -> Projector {
        Projector {
            matrix: u * &self.matrix * u.adjoint(),
            rank: self.rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>, tol: &TolerancePolicy) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let deviation = max_abs_diff(&matrix, &matrix.adjoint());
        if deviation > tol.tol_herm {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > tol.tol_norm {
            return Err(Error::NotNormalized { norm: tr.re });
        }
        let min = min_eigenvalue(&matrix);
        if min < PSD_SLACK {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self { matrix })
    }

    pub fn pure(psi: &State) -> Self {
        let v = psi.vector();
        Self {
            matrix: v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(hermitize(&self.matrix))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// `tr(ρP)`.
    pub fn expectation(&self, p: &DMatrix<C64>) -> f64 {
        self.matrix.component_mul(&p.transpose()).sum().re
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        (&self.matrix - &other.matrix).norm()
    }

    /// `U ρ U†`.
    pub fn conjugated(&self, u: &DMatrix<C64>) -> DensityMatrix {
        DensityMatrix {
            matrix: u * &self.matrix * u.adjoint(),
        }
    }
}

fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    SymmetricEigen::new(hermitize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Probability assignment on a family of projectors, optionally backed by a
/// generating density matrix that evaluates projectors outside the family.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFunction {
    dim: usize,
    assignments: Vec<(Projector, f64)>,
    generator: Option<DensityMatrix>,
}

impl FrameFunction {
    pub fn new(dim: usize, assignments: Vec<(Projector, f64)>, tol: &TolerancePolicy) -> Result<Self> {
        for (p, value) in &assignments {
            check_dim(dim, p.dim())?;
            if !value.is_finite() {
                return Err(Error::NonFinite);
            }
            if *value < -tol.tol_law || *value > 1.0 + tol.tol_law {
                return Err(Error::Precondition(format!(
                    "frame value {value} outside [0, 1]"
                )));
            }
            if p.rank() == dim && (value - 1.0).abs() > tol.tol_law {
                return Err(Error::Precondition(format!(
                    "identity projector assigned {value} instead of 1"
                )));
            }
        }
        Ok(Self {
            dim,
            assignments,
            generator: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn assignments(&self) -> &[(Projector, f64)] {
        &self.assignments
    }

    pub fn generator(&self) -> Option<&DensityMatrix> {
        self.generator.as_ref()
    }

    /// Replaces the value assigned to the `index`-th projector.
    pub fn with_value(mut self, index: usize, value: f64) -> Self {
        self.assignments[index].1 = value;
        self
    }

    /// Assigned value if `p` is in the family, else the generator's `tr(ρP)`.
    pub fn evaluate(&self, p: &Projector, tol: &TolerancePolicy) -> Result<f64> {
        check_dim(self.dim, p.dim())?;
        if let Some((_, v)) = self
            .assignments
            .iter()
            .find(|(q, _)| max_abs_diff(q.matrix(), p.matrix()) <= tol.tol_herm)
        {
            return Ok(*v);
        }
        match &self.generator {
            Some(rho) => Ok(rho.expectation(p.matrix())),
            None if p.rank() == self.dim => Ok(1.0),
            None => Err(Error::NotEvaluable),
        }
    }
}

/// The `d²` rank-one projectors onto `e_i`, `(e_i+e_j)/√2` and `(e_i+i·e_j)/√2`.
pub fn spanning_projectors(dim: usize) -> Result<Vec<Projector>> {
    if dim < 2 {
        return Err(Error::Precondition(format!(
            "spanning family needs dimension at least 2, got {dim}"
        )));
    }
    let unit = |i: usize| {
        let mut v = DVector::from_element(dim, ZERO);
        v[i] = ONE;
        v
    };
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        out.push(Projector::onto(&unit(i))?);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            out.push(Projector::onto(&(unit(i) + unit(j)))?);
            out.push(Projector::onto(&(unit(i) + unit(j) * C64::new(0.0, 1.0)))?);
        }
    }
    Ok(out)
}

/// Orthonormal basis of the hermitian `d × d` matrices under `Re tr(AB)`.
pub fn hermitian_basis(dim: usize) -> Vec<DMatrix<C64>> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let is = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        m[(i, i)] = ONE;
        out.push(m);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let mut re = DMatrix::from_element(dim, dim, ZERO);
            re[(i, j)] = s;
            re[(j, i)] = s;
            out.push(re);
            let mut im = DMatrix::from_element(dim, dim, ZERO);
            im[(i, j)] = -is;
            im[(j, i)] = is;
            out.push(im);
        }
    }
    out
}

/// `Re tr(AB)` for hermitian `A`, `B`.
fn real_trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.component_mul(&b.transpose()).sum().re
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

/// Rank of the Gram matrix `Re tr(P_i P_j)`.
pub fn gram_rank(family: &[Projector]) -> usize {
    let n = family.len();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        real_trace_product(family[i].matrix(), family[j].matrix())
    });
    numerical_rank(&gram)
}

/// Frame function `P ↦ tr(ρP)` on `family`, backed by `ρ` for other projectors.
pub fn frame_from_state(
    rho: &DensityMatrix,
    family: &[Projector],
    tol: &TolerancePolicy,
) -> Result<FrameFunction> {
    let assignments = family
        .iter()
        .map(|p| {
            check_dim(rho.dim(), p.dim())?;
            let v = rho.expectation(p.matrix());
            let v = if v < 0.0 && v >= -tol.tol_law {
                0.0
            } else if v > 1.0 && v <= 1.0 + tol.tol_law {
                1.0
            } else {
                v
            };
            Ok((p.clone(), v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut frame = FrameFunction::new(rho.dim(), assignments, tol)?;
    frame.generator = Some(rho.clone());
    Ok(frame)
}

/// Checks `F(Σ P_i) = Σ F(P_i)` for every family. Families summing to the
/// identity are compared against 1. The report carries the worst family.
pub fn check_additivity(
    frame: &FrameFunction,
    resolutions: &[Vec<Projector>],
    tol: &TolerancePolicy,
) -> Result<CheckReport> {
    let mut worst: Option<(f64, f64, f64, usize)> = None;
    for (index, family) in resolutions.iter().enumerate() {
        for (a, p) in family.iter().enumerate() {
            check_dim(frame.dim(), p.dim())?;
            for q in &family[a + 1..] {
                let deviation = (p.matrix() * q.matrix()).norm();
                if deviation > tol.tol_herm {
                    return Err(Error::NotOrthogonalFamily { deviation });
                }
            }
        }
        let sum: f64 = family
            .iter()
            .map(|p| frame.evaluate(p, tol))
            .sum::<Result<f64>>()?;
        let mut total = DMatrix::from_element(frame.dim(), frame.dim(), ZERO);
        for p in family {
            total += p.matrix();
        }
        let joined = Projector::new(total, tol)?;
        let target = frame.evaluate(&joined, tol)?;
        let d = (sum - target).abs();
        if worst.is_none_or(|w| d > w.0) {
            worst = Some((d, sum, target, index));
        }
    }
    let (d, sum, target, index) = worst.unwrap_or((0.0, 0.0, 0.0, 0));
    Ok(CheckReport::new(
        Axiom::FrameAdditivity,
        format!("{} families, worst #{index}", resolutions.len()),
        Side::Value(sum),
        Side::Value(target),
        d,
        tol,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub density: DensityMatrix,
    pub residual: f64,
    /// Smallest eigenvalue before clipping.
    pub min_eigenvalue: f64,
    pub clipped: bool,
}

pub fn reconstruct_density(frame: &FrameFunction, tol: &TolerancePolicy) -> Result<DensityMatrix> {
    reconstruct_density_report(frame, tol).map(|r| r.density)
}

/// Least-squares reconstruction with diagnostics.
pub fn reconstruct_density_report(
    frame: &FrameFunction,
    tol: &TolerancePolicy,
) -> Result<Reconstruction> {
    let d = frame.dim();
    let basis = hermitian_basis(d);
    let unknowns = basis.len();
    let rows = frame.assignments().len() + 1;
    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut b = DVector::<f64>::zeros(rows);
    for (r, (p, v)) in frame.assignments().iter().enumerate() {
        for (k, e) in basis.iter().enumerate() {
            a[(r, k)] = real_trace_product(e, p.matrix());
        }
        b[r] = *v;
    }
    for (k, e) in basis.iter().enumerate() {
        a[(rows - 1, k)] = e.trace().re;
    }
    b[rows - 1] = 1.0;

    let rank = numerical_rank(&a);
    if rank < unknowns {
        return Err(Error::InsufficientSpan {
            rank,
            required: unknowns,
        });
    }
    let svd = a.clone().svd(true, true);
    let coeffs = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Precondition(e.to_string()))?;
    let residual = (&a * &coeffs - &b).amax();
    if residual > RESIDUAL_LIMIT {
        return Err(Error::InconsistentFrame { residual });
    }
    let mut rho = DMatrix::from_element(d, d, ZERO);
    for (c, e) in coeffs.iter().zip(&basis) {
        rho += e * C64::new(*c, 0.0);
    }
    let rho = hermitize(&rho);
    let eig = SymmetricEigen::new(rho.clone());
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < PSD_FAILURE {
        return Err(Error::NotPsd { min_eigenvalue });
    }
    let clipped = min_eigenvalue < PSD_SLACK;
    let rho = if clipped {
        let values = eig.eigenvalues.map(|x| x.max(0.0));
        let total: f64 = values.sum();
        let v = &eig.eigenvectors;
        let diag = DMatrix::from_diagonal(&values.map(|x| C64::new(x / total, 0.0)));
        v * diag * v.adjoint()
    } else {
        rho
    };
    Ok(Reconstruction {
        density: DensityMatrix::new(rho, tol)?,
        residual,
        min_eigenvalue,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{haar_matrix, instance_rng, random_density, random_state};

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn spanning_family_sizes() {
        for d in [2, 3, 5] {
            let fam = spanning_projectors(d).unwrap();
            assert_eq!(fam.len(), d * d);
            assert_eq!(gram_rank(&fam), d * d);
        }
        assert!(matches!(spanning_projectors(1), Err(Error::Precondition(_))));
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        let b = hermitian_basis(3);
        for (i, x) in b.iter().enumerate() {
            assert!(max_abs_diff(x, &x.adjoint()) == 0.0);
            for (j, y) in b.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((real_trace_product(x, y) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn projector_validation() {
        let bad = DMatrix::from_element(2, 2, C64::new(1.0, 0.0));
        assert!(matches!(Projector::new(bad, &tol()), Err(Error::NotProjector(_))));
        let p = Projector::new(DMatrix::identity(3, 3), &tol()).unwrap();
        assert_eq!(p.rank(), 3);
    }

    #[test]
    fn maximally_mixed_values() {
        let rho = DensityMatrix::maximally_mixed(4);
        let fam = spanning_projectors(4).unwrap();
        let f = frame_from_state(&rho, &fam, &tol()).unwrap();
        for (_, v) in f.assignments() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_state_on_itself() {
        let psi = random_state(3, &mut instance_rng(2, 0));
        let rho = DensityMatrix::pure(&psi);
        let p = Projector::onto(psi.vector()).unwrap();
        let f = frame_from_state(&rho, &[p], &tol()).unwrap();
        assert!((f.assignments()[0].1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn frame_dim_mismatch() {
        let rho = DensityMatrix::maximally_mixed(3);
        let fam = spanning_projectors(2).unwrap();
        assert!(matches!(
            frame_from_state(&rho, &fam, &tol()),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn additivity_of_eigenbasis_and_pairs() {
        let mut rng = instance_rng(3, 0);
        let rho = random_density(4, 4, &mut rng).unwrap();
        let u = haar_matrix(4, &mut rng);
        let family: Vec<Projector> = (0..4)
            .map(|i| Projector::onto(&u.column(i).into_owned()).unwrap())
            .collect();
        let f = frame_from_state(&rho, &family, &tol()).unwrap();
        let full = check_additivity(&f, &[family.clone()], &tol()).unwrap();
        assert!(full.pass);
        assert_eq!(full.rhs, Side::Value(1.0));
        let pair = check_additivity(&f, &[family[..2].to_vec()], &tol()).unwrap();
        assert!(pair.discrepancy <= 1e-12);
        let perturbed = f.clone().with_value(0, f.assignments()[0].1 + 0.1);
        let bad = check_additivity(&perturbed, &[family.clone()], &tol()).unwrap();
        assert!(!bad.pass);
        assert!((bad.discrepancy - 0.1).abs() < 1e-12);
    }

    #[test]
    fn additivity_rejects_overlap() {
        let rho = DensityMatrix::maximally_mixed(2);
        let fam = spanning_projectors(2).unwrap();
        let f = frame_from_state(&rho, &fam, &tol()).unwrap();
        assert!(matches!(
            check_additivity(&f, &[vec![fam[0].clone(), fam[2].clone()]], &tol()),
            Err(Error::NotOrthogonalFamily { .. })
        ));
    }

    #[test]
    fn reconstruct_maximally_mixed() {
        let rho = DensityMatrix::maximally_mixed(2);
        let f = frame_from_state(&rho, &spanning_projectors(2).unwrap(), &tol()).unwrap();
        let back = reconstruct_density(&f, &tol()).unwrap();
        assert!(back.frobenius_distance(&rho) < 1e-12);
    }

    #[test]
    fn reconstruct_pure_and_mixed() {
        let mut rng = instance_rng(4, 0);
        let psi = random_state(3, &mut rng);
        let rho = DensityMatrix::pure(&psi);
        let f = frame_from_state(&rho, &spanning_projectors(3).unwrap(), &tol()).unwrap();
        assert!(reconstruct_density(&f, &tol()).unwrap().frobenius_distance(&rho) <= 1e-8);
        let mixed = random_density(5, 3, &mut rng).unwrap();
        let f = frame_from_state(&mixed, &spanning_projectors(5).unwrap(), &tol()).unwrap();
        assert!(reconstruct_density(&f, &tol()).unwrap().frobenius_distance(&mixed) <= 1e-8);
    }

    #[test]
    fn reconstruct_needs_span() {
        let rho = DensityMatrix::maximally_mixed(3);
        let fam = spanning_projectors(3).unwrap();
        let f = frame_from_state(&rho, &fam[..5], &tol()).unwrap();
        assert!(matches!(
            reconstruct_density(&f, &tol()),
            Err(Error::InsufficientSpan { rank: 5, required: 9 })
        ));
    }

    #[test]
    fn reconstruct_rejects_non_psd() {
        // Assigning 0 to every basis vector but 1/2 to the diagonal superpositions
        // forces a negative eigenvalue in any consistent fit.
        let fam = spanning_projectors(2).unwrap();
        let values = [0.5, 0.5, 1.0, 1.0];
        let f = FrameFunction::new(
            2,
            fam.into_iter().zip(values).collect(),
            &tol(),
        )
        .unwrap();
        assert!(matches!(
            reconstruct_density(&f, &tol()),
            Err(Error::NotPsd { .. })
        ));
    }
}
