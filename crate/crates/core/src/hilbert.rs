//! Dense complex linear algebra on a fixed finite dimension.
//!
//! Composite systems use row-major pair ordering: for `a` of dimension `m`
//! and `b` of dimension `n`, entry `(i, j)` of `a ⊗ b` lives at index
//! `i * n + j`. Every operator built here (Kronecker products, joint
//! observables) follows the same convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::TolerancePolicy;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Ordered complex amplitudes with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(DVector<C64>);

impl ComplexVector {
    pub fn new(entries: DVector<C64>) -> Result<Self> {
        if entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(Self(entries))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn from_slice(entries: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(entries))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(
            entries.len(),
            entries.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<C64> {
        self.0
    }
}

/// A unit vector: a pure state of a `dim`-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    vector: DVector<C64>,
}

impl State {
    /// Wraps an already normalized vector, rejecting it if the norm is off by
    /// more than `tol_norm`. The accepted vector is rescaled to unit norm.
    pub fn new(vector: ComplexVector, tol: &TolerancePolicy) -> Result<Self> {
        let norm = vector.norm();
        if (norm - 1.0).abs() > tol.tol_norm || vector.is_empty() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            vector: vector.into_vector() / C64::new(norm, 0.0),
        })
    }

    /// The `index`-th standard basis vector.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Precondition(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = DVector::from_element(dim, ZERO);
        v[index] = ONE;
        Ok(Self { vector: v })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.vector
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.vector.as_slice()
    }

    pub fn inner(&self, other: &State) -> C64 {
        self.vector.dotc(&other.vector)
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> State {
        State {
            vector: &self.vector * C64::from_polar(1.0, theta),
        }
    }

    /// `min_θ ‖self − e^{iθ}other‖`: zero iff the two states are the same ray.
    pub fn ray_distance(&self, other: &State) -> f64 {
        let overlap = other.inner(self).norm();
        (2.0 - 2.0 * overlap).max(0.0).sqrt()
    }

    /// Applies an operator that must preserve the norm of this state.
    pub fn apply(&self, op: &ComplexOperator, tol: &TolerancePolicy) -> Result<State> {
        check_dim(op.dim(), self.dim())?;
        let v = mul_vec_skip_zeros(op.matrix(), &self.vector);
        State::new(ComplexVector::new(v)?, tol)
    }
}

/// Square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOperator(DMatrix<C64>);

impl ComplexOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if !matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(matrix))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> ComplexOperator {
        Self(self.0.adjoint())
    }

    /// `‖A − A†‖_F`.
    pub fn hermiticity_deviation(&self) -> f64 {
        (&self.0 - self.0.adjoint()).norm()
    }

    /// `‖U†U − I‖_F`.
    pub fn unitarity_deviation(&self) -> f64 {
        let gram = adjoint_mul_skip_zeros(&self.0, &self.0);
        (gram - DMatrix::<C64>::identity(self.dim(), self.dim())).norm()
    }

    pub fn is_unitary(&self, tol: &TolerancePolicy) -> bool {
        self.unitarity_deviation() <= tol.tol_unitary
    }

    pub fn mul(&self, other: &ComplexOperator) -> ComplexOperator {
        Self(mul_skip_zeros(&self.0, &other.0))
    }

    /// Sorted real eigenvalues of the hermitian part.
    pub fn hermitian_spectrum(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

pub fn normalize(v: &ComplexVector, tol: &TolerancePolicy) -> Result<State> {
    let norm = v.norm();
    // Scale-aware: a vector whose norm is tiny relative to machine precision is rejected.
    if !(norm > tol.tol_norm * f64::EPSILON.sqrt()) || v.is_empty() {
        return Err(Error::ZeroVector);
    }
    Ok(State {
        vector: v.as_vector() / C64::new(norm, 0.0),
    })
}

/// `a ⊗ b` in row-major pair order.
pub fn tensor_state(a: &State, b: &State) -> State {
    let (m, n) = (a.dim(), b.dim());
    let mut v = DVector::from_element(m * n, ZERO);
    for i in 0..m {
        for j in 0..n {
            v[i * n + j] = a.vector[i] * b.vector[j];
        }
    }
    State { vector: v }
}

/// Kronecker product `A ⊗ B`, index-compatible with [`tensor_state`].
pub fn tensor_operator(a: &ComplexOperator, b: &ComplexOperator) -> ComplexOperator {
    ComplexOperator(a.0.kronecker(&b.0))
}

/// `U† A U`, after checking that `U` is unitary.
pub fn conjugate_by(
    u: &ComplexOperator,
    a: &ComplexOperator,
    tol: &TolerancePolicy,
) -> Result<ComplexOperator> {
    check_dim(u.dim(), a.dim())?;
    let deviation = u.unitarity_deviation();
    if deviation > tol.tol_unitary {
        return Err(Error::NotUnitary { deviation });
    }
    let au = mul_skip_zeros(&a.0, &u.0);
    Ok(ComplexOperator(adjoint_mul_skip_zeros(&u.0, &au)))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}

/// `A·B`, skipping exact zeros of `A`. Permutation-like operators on large
/// composite systems are mostly zeros, so this is `O(nnz(A)·n)`.
pub fn mul_skip_zeros(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::from_element(a.nrows(), b.ncols(), ZERO);
    for k in 0..a.ncols() {
        for i in 0..a.nrows() {
            let aik = a[(i, k)];
            if aik == ZERO {
                continue;
            }
            for j in 0..b.ncols() {
                let bkj = b[(k, j)];
                if bkj != ZERO {
                    out[(i, j)] += aik * bkj;
                }
            }
        }
    }
    out
}

/// `A†·B`, skipping exact zeros of `A`.
pub fn adjoint_mul_skip_zeros(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::from_element(a.ncols(), b.ncols(), ZERO);
    for k in 0..a.nrows() {
        for i in 0..a.ncols() {
            let aki = a[(k, i)].conj();
            if aki == ZERO {
                continue;
            }
            for j in 0..b.ncols() {
                let bkj = b[(k, j)];
                if bkj != ZERO {
                    out[(i, j)] += aki * bkj;
                }
            }
        }
    }
    out
}

pub fn mul_vec_skip_zeros(a: &DMatrix<C64>, v: &DVector<C64>) -> DVector<C64> {
    assert_eq!(a.ncols(), v.len());
    let mut out = DVector::from_element(a.nrows(), ZERO);
    for k in 0..a.ncols() {
        let vk = v[k];
        if vk == ZERO {
            continue;
        }
        for i in 0..a.nrows() {
            let aik = a[(i, k)];
            if aik != ZERO {
                out[i] += aik * vk;
            }
        }
    }
    out
}

/// Largest entry modulus of `a − b`.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
