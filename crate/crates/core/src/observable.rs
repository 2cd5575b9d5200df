//! Observables in spectral form and the functional calculus on them.
//!
//! An [`Observable`] is stored as its distinct eigenvalues (strictly
//! increasing) together with an orthonormal basis of each eigenspace. The
//! projector `[X=x]` is recovered from the basis on demand, which keeps large
//! composite observables cheap to hold.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{
    adjoint_mul_skip_zeros, check_dim, mul_skip_zeros, mul_vec_skip_zeros, ComplexOperator, State,
    C64, ONE, ZERO,
};
use crate::tolerance::TolerancePolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    eigenvalues: Vec<f64>,
    eigenspaces: Vec<DMatrix<C64>>,
    dim: usize,
}

/// Builds an observable from eigenvalues and the orthonormal basis columns of
/// each eigenspace. Groups are sorted by eigenvalue; together the columns
/// must form a complete orthonormal basis.
pub fn make_observable(
    eigenvalues: &[f64],
    groups: &[DMatrix<C64>],
    tol: &TolerancePolicy,
) -> Result<Observable> {
    if eigenvalues.len() != groups.len() {
        return Err(Error::Precondition(format!(
            "{} eigenvalues for {} eigenspace groups",
            eigenvalues.len(),
            groups.len()
        )));
    }
    if eigenvalues.is_empty() {
        return Err(Error::Precondition("observable needs at least one eigenvalue".into()));
    }
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let dim = groups[0].nrows();
    for g in groups {
        check_dim(dim, g.nrows())?;
        if g.ncols() == 0 {
            return Err(Error::Precondition("empty eigenspace group".into()));
        }
    }
    let total: usize = groups.iter().map(|g| g.ncols()).sum();
    if total != dim {
        return Err(Error::Precondition(format!(
            "eigenspaces have {total} columns in total, expected {dim}"
        )));
    }

    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
    for w in order.windows(2) {
        if tol.same_value(eigenvalues[w[0]], eigenvalues[w[1]]) {
            return Err(Error::DuplicateEigenvalue(eigenvalues[w[1]]));
        }
    }

    let observable = Observable {
        eigenvalues: order.iter().map(|&i| eigenvalues[i]).collect(),
        eigenspaces: order.iter().map(|&i| groups[i].clone()).collect(),
        dim,
    };
    let deviation = observable.basis_orthonormality_deviation();
    if deviation > tol.tol_norm {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(observable)
}

impl Observable {
    /// Diagonal observable in the standard basis; equal entries share an eigenspace.
    pub fn from_diagonal(values: &[f64], tol: &TolerancePolicy) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("empty diagonal".into()));
        }
        let dim = values.len();
        let groups = group_by_value(
            values.iter().copied().enumerate().map(|(i, v)| (v, i)),
            tol,
        );
        let eigenvalues: Vec<f64> = groups.iter().map(|(v, _)| *v).collect();
        let spaces: Vec<DMatrix<C64>> = groups
            .iter()
            .map(|(_, idx)| {
                let mut m = DMatrix::from_element(dim, idx.len(), ZERO);
                for (c, &i) in idx.iter().enumerate() {
                    m[(i, c)] = ONE;
                }
                m
            })
            .collect();
        make_observable(&eigenvalues, &spaces, tol)
    }

    /// Nondegenerate observable whose `i`-th eigenvalue has eigenvector `basis.column(i)`.
    pub fn from_eigenbasis(
        eigenvalues: &[f64],
        basis: &DMatrix<C64>,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        check_dim(basis.ncols(), eigenvalues.len())?;
        let groups: Vec<DMatrix<C64>> = (0..basis.ncols())
            .map(|i| basis.columns(i, 1).into_owned())
            .collect();
        make_observable(eigenvalues, &groups, tol)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Orthonormal basis columns of the `i`-th eigenspace.
    pub fn eigenspace(&self, i: usize) -> &DMatrix<C64> {
        &self.eigenspaces[i]
    }

    pub fn rank(&self, i: usize) -> usize {
        self.eigenspaces[i].ncols()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.eigenspaces.iter().all(|g| g.ncols() == 1)
    }

    pub fn index_of(&self, x: f64, tol: &TolerancePolicy) -> Option<usize> {
        self.eigenvalues.iter().position(|&e| tol.same_value(e, x))
    }

    /// The eigenvector `|X=x_i⟩`; only meaningful when the eigenspace is one-dimensional.
    pub fn eigenvector(&self, i: usize) -> Result<State> {
        if self.rank(i) != 1 {
            return Err(Error::Degenerate);
        }
        let v = crate::hilbert::ComplexVector::new(self.eigenspaces[i].column(0).into_owned())?;
        State::new(v, &TolerancePolicy::default())
    }

    /// The projector `[X=x_i]`.
    pub fn projector(&self, i: usize) -> DMatrix<C64> {
        let v = &self.eigenspaces[i];
        mul_skip_zeros(v, &v.adjoint())
    }

    pub fn projectors(&self) -> Vec<DMatrix<C64>> {
        (0..self.len()).map(|i| self.projector(i)).collect()
    }

    /// `[X=x_i] v`.
    pub fn project(&self, i: usize, v: &DVector<C64>) -> DVector<C64> {
        let basis = &self.eigenspaces[i];
        let coeffs = basis.adjoint() * v;
        mul_vec_skip_zeros(basis, &coeffs)
    }

    /// `‖[X=x_i] v‖²`.
    pub fn projected_weight(&self, i: usize, v: &DVector<C64>) -> f64 {
        (self.eigenspaces[i].adjoint() * v).norm_squared()
    }

    /// All eigenspace columns side by side, in eigenvalue order.
    pub fn basis(&self) -> DMatrix<C64> {
        let mut b = DMatrix::from_element(self.dim, self.dim, ZERO);
        let mut c = 0;
        for g in &self.eigenspaces {
            b.columns_mut(c, g.ncols()).copy_from(g);
            c += g.ncols();
        }
        b
    }

    /// `Σ x [X=x]` as a dense matrix.
    pub fn matrix(&self) -> ComplexOperator {
        let b = self.basis();
        let mut scaled = b.clone();
        let mut c = 0;
        for (x, g) in self.eigenvalues.iter().zip(&self.eigenspaces) {
            for k in 0..g.ncols() {
                scaled.column_mut(c + k).scale_mut(*x);
            }
            c += g.ncols();
        }
        ComplexOperator::new(mul_skip_zeros(&scaled, &b.adjoint()))
            .expect("spectral sum of finite data is a finite square matrix")
    }

    /// `U† X U`, with eigenspaces `U† [X=x]`.
    pub fn conjugated(&self, u: &UnitaryMap) -> Result<Observable> {
        check_dim(self.dim, u.dim())?;
        let ud = u.matrix().matrix();
        Ok(Observable {
            eigenvalues: self.eigenvalues.clone(),
            eigenspaces: self
                .eigenspaces
                .iter()
                .map(|g| adjoint_mul_skip_zeros(ud, g))
                .collect(),
            dim: self.dim,
        })
    }

    /// `X ⊗ 1` on a system extended by an ancilla of dimension `ancilla_dim`.
    pub fn extend_right(&self, ancilla_dim: usize) -> Observable {
        let id = DMatrix::<C64>::identity(ancilla_dim, ancilla_dim);
        Observable {
            eigenvalues: self.eigenvalues.clone(),
            eigenspaces: self.eigenspaces.iter().map(|g| g.kronecker(&id)).collect(),
            dim: self.dim * ancilla_dim,
        }
    }

    /// `1 ⊗ X` on a system whose first factor has dimension `system_dim`.
    pub fn extend_left(&self, system_dim: usize) -> Observable {
        let id = DMatrix::<C64>::identity(system_dim, system_dim);
        Observable {
            eigenvalues: self.eigenvalues.clone(),
            eigenspaces: self.eigenspaces.iter().map(|g| id.kronecker(g)).collect(),
            dim: self.dim * system_dim,
        }
    }

    fn basis_orthonormality_deviation(&self) -> f64 {
        let b = self.basis();
        let gram = adjoint_mul_skip_zeros(&b, &b);
        (gram - DMatrix::<C64>::identity(self.dim, self.dim)).norm()
    }
}

/// Groups `(value, item)` pairs by value, merging values that agree within
/// `tol_merge`. Groups come out in increasing value order, each labelled by
/// its smallest value.
pub(crate) fn group_by_value<T>(
    pairs: impl IntoIterator<Item = (f64, T)>,
    tol: &TolerancePolicy,
) -> Vec<(f64, Vec<T>)> {
    let mut pairs: Vec<(f64, T)> = pairs.into_iter().collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, Vec<T>)> = Vec::new();
    for (v, item) in pairs {
        match groups.last_mut() {
            Some((rep, items)) if tol.same_value(*rep, v) => items.push(item),
            _ => groups.push((v, vec![item])),
        }
    }
    groups
}

/// A real function given by its values on a finite set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    table: Vec<(f64, f64)>,
}

impl FunctionSpec {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut table: Vec<(f64, f64)> = pairs.into_iter().collect();
        if table.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::NonFinite);
        }
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in table.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Precondition(format!(
                    "function table lists argument {} twice",
                    w[0].0
                )));
            }
        }
        Ok(Self { table })
    }

    pub fn from_fn(domain: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_pairs(domain.iter().map(|&x| (x, f(x))))
    }

    pub fn identity(domain: &[f64]) -> Self {
        Self::from_fn(domain, |x| x).expect("identity on a finite domain")
    }

    pub fn affine(domain: &[f64], a: f64, b: f64) -> Result<Self> {
        Self::from_fn(domain, |x| a * x + b)
    }

    /// `1_S`: one on the points of `set`, zero elsewhere on `domain`.
    pub fn indicator(domain: &[f64], set: &[f64], tol: &TolerancePolicy) -> Self {
        Self::from_fn(domain, |x| {
            if set.iter().any(|&s| tol.same_value(s, x)) {
                1.0
            } else {
                0.0
            }
        })
        .expect("indicator on a finite domain")
    }

    pub fn table(&self) -> &[(f64, f64)] {
        &self.table
    }

    pub fn domain(&self) -> Vec<f64> {
        self.table.iter().map(|(x, _)| *x).collect()
    }

    pub fn eval(&self, x: f64, tol: &TolerancePolicy) -> Result<f64> {
        // Exact hit first; the tolerance only guards float noise in the argument.
        if let Ok(i) = self.table.binary_search_by(|(a, _)| a.total_cmp(&x)) {
            return Ok(self.table[i].1);
        }
        self.table
            .iter()
            .find(|(a, _)| tol.same_value(*a, x))
            .map(|(_, y)| *y)
            .ok_or(Error::PartialFunction(x))
    }

    pub fn is_injective(&self, tol: &TolerancePolicy) -> bool {
        let groups = group_by_value(self.table.iter().map(|&(_, y)| (y, ())), tol);
        groups.len() == self.table.len()
    }

    /// `g ∘ self`, on the domain of `self`.
    pub fn then(&self, g: &FunctionSpec, tol: &TolerancePolicy) -> Result<FunctionSpec> {
        let pairs = self
            .table
            .iter()
            .map(|&(x, y)| g.eval(y, tol).map(|z| (x, z)))
            .collect::<Result<Vec<_>>>()?;
        FunctionSpec::from_pairs(pairs)
    }
}

/// `f(X)`: eigenvalues are the image of `f`, and the projector of `y` is the
/// sum of `[X=x]` over `f(x)=y`.
pub fn apply_function(
    x: &Observable,
    f: &FunctionSpec,
    tol: &TolerancePolicy,
) -> Result<Observable> {
    let images = x
        .eigenvalues
        .iter()
        .map(|&e| f.eval(e, tol))
        .collect::<Result<Vec<_>>>()?;
    let groups = group_by_value(images.into_iter().enumerate().map(|(i, y)| (y, i)), tol);
    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut eigenspaces = Vec::with_capacity(groups.len());
    for (y, members) in groups {
        let cols: usize = members.iter().map(|&i| x.rank(i)).sum();
        let mut space = DMatrix::from_element(x.dim, cols, ZERO);
        let mut c = 0;
        for i in members {
            let g = &x.eigenspaces[i];
            space.columns_mut(c, g.ncols()).copy_from(g);
            c += g.ncols();
        }
        eigenvalues.push(y);
        eigenspaces.push(space);
    }
    Ok(Observable {
        eigenvalues,
        eigenspaces,
        dim: x.dim,
    })
}

/// A bijection `u` of a finite set of reals, stored by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationSpec {
    domain: Vec<f64>,
    image: Vec<usize>,
}

impl PermutationSpec {
    /// `u(domain[i]) = images[i]`; `images` must be a rearrangement of `domain`.
    pub fn new(domain: &[f64], images: &[f64], tol: &TolerancePolicy) -> Result<Self> {
        if domain.len() != images.len() {
            return Err(Error::NotBijection);
        }
        let mut sorted: Vec<(f64, f64)> = domain.iter().copied().zip(images.iter().copied()).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let dom: Vec<f64> = sorted.iter().map(|p| p.0).collect();
        for w in dom.windows(2) {
            if tol.same_value(w[0], w[1]) {
                return Err(Error::NotBijection);
            }
        }
        let mut image = Vec::with_capacity(dom.len());
        let mut hit = vec![false; dom.len()];
        for &(_, y) in &sorted {
            let j = dom
                .iter()
                .position(|&d| tol.same_value(d, y))
                .ok_or(Error::NotBijection)?;
            if hit[j] {
                return Err(Error::NotBijection);
            }
            hit[j] = true;
            image.push(j);
        }
        Ok(Self { domain: dom, image })
    }

    pub fn identity(domain: &[f64], tol: &TolerancePolicy) -> Result<Self> {
        Self::new(domain, domain, tol)
    }

    /// Exchanges `a` and `b`, fixing everything else.
    pub fn transposition(domain: &[f64], a: f64, b: f64, tol: &TolerancePolicy) -> Result<Self> {
        Self::from_cycles(domain, &[vec![a, b]], tol)
    }

    /// Product of disjoint cycles; each cycle `[c0, c1, …]` maps `c0 → c1 → … → c0`.
    pub fn from_cycles(domain: &[f64], cycles: &[Vec<f64>], tol: &TolerancePolicy) -> Result<Self> {
        let mut images = domain.to_vec();
        let mut touched = vec![false; domain.len()];
        for cycle in cycles {
            for (k, &from) in cycle.iter().enumerate() {
                let to = cycle[(k + 1) % cycle.len()];
                let i = domain
                    .iter()
                    .position(|&d| tol.same_value(d, from))
                    .ok_or(Error::PartialFunction(from))?;
                if touched[i] {
                    return Err(Error::NotBijection);
                }
                touched[i] = true;
                images[i] = to;
            }
        }
        Self::new(domain, &images, tol)
    }

    pub fn domain(&self) -> &[f64] {
        &self.domain
    }

    pub fn apply(&self, x: f64, tol: &TolerancePolicy) -> Result<f64> {
        let i = self
            .domain
            .iter()
            .position(|&d| tol.same_value(d, x))
            .ok_or(Error::PartialFunction(x))?;
        Ok(self.domain[self.image[i]])
    }

    /// Index form: `u(domain[i]) = domain[image_index(i)]`.
    pub fn image_index(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn inverse(&self) -> PermutationSpec {
        let mut inv = vec![0; self.image.len()];
        for (i, &j) in self.image.iter().enumerate() {
            inv[j] = i;
        }
        Self {
            domain: self.domain.clone(),
            image: inv,
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &PermutationSpec) -> Result<PermutationSpec> {
        if self.domain != other.domain {
            return Err(Error::NotBijection);
        }
        Ok(Self {
            domain: self.domain.clone(),
            image: other.image.iter().map(|&j| self.image[j]).collect(),
        })
    }

    pub fn as_function(&self) -> FunctionSpec {
        FunctionSpec::from_pairs(
            self.image
                .iter()
                .enumerate()
                .map(|(i, &j)| (self.domain[i], self.domain[j])),
        )
        .expect("permutation table has distinct arguments")
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Non-trivial cycles in index form, each starting at its smallest index.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.image.len()];
        let mut out = Vec::new();
        for start in 0..self.image.len() {
            if seen[start] || self.image[start] == start {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut i = self.image[start];
            while i != start {
                seen[i] = true;
                cycle.push(i);
                i = self.image[i];
            }
            out.push(cycle);
        }
        out
    }

    pub fn describe(&self) -> String {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return "id".into();
        }
        cycles
            .iter()
            .map(|c| {
                let names: Vec<String> = c.iter().map(|&i| fmt_real(self.domain[i])).collect();
                format!("({})", names.join(" "))
            })
            .collect::<Vec<_>>()
            .join("")
    }
}

pub(crate) fn fmt_real(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitaryTag {
    /// Permutes the eigenvectors of a reference observable: `U|x⟩ = |u(x)⟩`.
    Permutation(PermutationSpec),
    /// Diagonal in the eigenbasis of a reference observable, with these phases.
    Diagonal(FunctionSpec),
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMap {
    matrix: ComplexOperator,
    tag: UnitaryTag,
}

impl UnitaryMap {
    pub fn general(matrix: ComplexOperator, tol: &TolerancePolicy) -> Result<Self> {
        let deviation = matrix.unitarity_deviation();
        if deviation > tol.tol_unitary {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self {
            matrix,
            tag: UnitaryTag::General,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexOperator::identity(dim),
            tag: UnitaryTag::General,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexOperator {
        &self.matrix
    }

    pub fn tag(&self) -> &UnitaryTag {
        &self.tag
    }

    /// `Uψ`.
    pub fn apply(&self, psi: &State, tol: &TolerancePolicy) -> Result<State> {
        psi.apply(&self.matrix, tol)
    }
}

/// The unitary with `U|X=x⟩ = |X=u(x)⟩`. With this convention
/// `U†XU = u(X)` and `UXU† = u⁻¹(X)`.
pub fn permutation_unitary(
    x: &Observable,
    u: &PermutationSpec,
    tol: &TolerancePolicy,
) -> Result<UnitaryMap> {
    if !x.is_nondegenerate() {
        return Err(Error::Degenerate);
    }
    if u.domain.len() != x.len()
        || !u
            .domain
            .iter()
            .zip(&x.eigenvalues)
            .all(|(&a, &b)| tol.same_value(a, b))
    {
        return Err(Error::NotBijection);
    }
    let basis = x.basis();
    let mut permuted = DMatrix::from_element(x.dim, x.dim, ZERO);
    for i in 0..x.len() {
        permuted.set_column(i, &basis.column(u.image[i]));
    }
    let matrix = ComplexOperator::new(mul_skip_zeros(&permuted, &basis.adjoint()))?;
    Ok(UnitaryMap {
        matrix,
        tag: UnitaryTag::Permutation(u.clone()),
    })
}

/// `Σ e^{iφ(x)} [X=x]`.
pub fn diagonal_phase_unitary(
    x: &Observable,
    phases: &FunctionSpec,
    tol: &TolerancePolicy,
) -> Result<UnitaryMap> {
    if !x.is_nondegenerate() {
        return Err(Error::Degenerate);
    }
    let basis = x.basis();
    let mut scaled = basis.clone();
    for (i, &e) in x.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, phases.eval(e, tol)?);
        for r in 0..x.dim {
            scaled[(r, i)] *= phase;
        }
    }
    let matrix = ComplexOperator::new(mul_skip_zeros(&scaled, &basis.adjoint()))?;
    Ok(UnitaryMap {
        matrix,
        tag: UnitaryTag::Diagonal(phases.clone()),
    })
}

/// A joint observable `Z` with `X = f(Z)`, `Y = g(Z)`, and the realised
/// outcome tuple behind every label of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointObservable {
    pub z: Observable,
    /// `tuples[i]` is the outcome tuple labelled by eigenvalue `i` of `z`.
    pub tuples: Vec<Vec<f64>>,
}

impl JointObservable {
    /// The function sending each label of `z` to coordinate `k` of its tuple.
    pub fn coordinate(&self, k: usize) -> FunctionSpec {
        FunctionSpec::from_pairs(
            self.z
                .eigenvalues()
                .iter()
                .zip(&self.tuples)
                .map(|(&z, t)| (z, t[k])),
        )
        .expect("labels are distinct")
    }

    /// Tabulates `f` over the realised tuples as a function of the label.
    pub fn tabulate(&self, f: impl Fn(&[f64]) -> f64) -> Result<FunctionSpec> {
        FunctionSpec::from_pairs(
            self.z
                .eigenvalues()
                .iter()
                .zip(&self.tuples)
                .map(|(&z, t)| (z, f(t))),
        )
    }

    /// The label of the tuple, if that joint outcome is realised.
    pub fn label_of(&self, tuple: &[f64], tol: &TolerancePolicy) -> Option<f64> {
        self.tuples
            .iter()
            .position(|t| {
                t.len() == tuple.len() && t.iter().zip(tuple).all(|(&a, &b)| tol.same_value(a, b))
            })
            .map(|i| self.z.eigenvalues()[i])
    }
}

/// Commutator norm `‖XY − YX‖_F`.
pub fn commutator_norm(x: &Observable, y: &Observable) -> f64 {
    let (a, b) = (x.matrix(), y.matrix());
    let ab = mul_skip_zeros(a.matrix(), b.matrix());
    let ba = mul_skip_zeros(b.matrix(), a.matrix());
    (ab - ba).norm()
}

/// Joins commuting `X`, `Y` into `Z` whose labels `0, 1, 2, …` enumerate the
/// realised pairs `(x, y)` in lexicographic order. Returns `(Z, f, g)` with
/// `X = f(Z)` and `Y = g(Z)`.
pub fn join_compatible(
    x: &Observable,
    y: &Observable,
    tol: &TolerancePolicy,
) -> Result<(Observable, FunctionSpec, FunctionSpec)> {
    let joint = join_all(&[x.clone(), y.clone()], tol)?;
    let f = joint.coordinate(0);
    let g = joint.coordinate(1);
    Ok((joint.z, f, g))
}

/// Iterated join of mutually commuting observables.
pub fn join_all(xs: &[Observable], tol: &TolerancePolicy) -> Result<JointObservable> {
    let first = xs
        .first()
        .ok_or_else(|| Error::Precondition("nothing to join".into()))?;
    for a in xs {
        check_dim(first.dim, a.dim)?;
    }
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let deviation = commutator_norm(&xs[i], &xs[j]);
            if deviation > tol.tol_herm {
                return Err(Error::NotCommuting { deviation });
            }
        }
    }
    let mut tuples: Vec<Vec<f64>> = first.eigenvalues.iter().map(|&e| vec![e]).collect();
    let mut spaces: Vec<DMatrix<C64>> = first.eigenspaces.clone();
    for next in &xs[1..] {
        let mut new_tuples = Vec::new();
        let mut new_spaces = Vec::new();
        for (t, v) in tuples.iter().zip(&spaces) {
            for (k, &e) in next.eigenvalues.iter().enumerate() {
                // Restrict [Y=y] to the current block: W = V† P V, keep its unit eigenvectors.
                let w_half = next.eigenspaces[k].adjoint() * v;
                let compressed = w_half.adjoint() * &w_half;
                let weight: f64 = compressed.trace().re;
                if weight < 0.5 {
                    continue;
                }
                let eig = compressed.symmetric_eigen();
                let keep: Vec<usize> = (0..eig.eigenvalues.len())
                    .filter(|&c| eig.eigenvalues[c] > 0.5)
                    .collect();
                if keep.len() != weight.round() as usize {
                    return Err(Error::NotCommuting {
                        deviation: (weight - keep.len() as f64).abs(),
                    });
                }
                let mut block = DMatrix::from_element(v.ncols(), keep.len(), ZERO);
                for (c, &src) in keep.iter().enumerate() {
                    block.set_column(c, &eig.eigenvectors.column(src));
                }
                let mut tuple = t.clone();
                tuple.push(e);
                new_tuples.push(tuple);
                new_spaces.push(v * block);
            }
        }
        tuples = new_tuples;
        spaces = new_spaces;
    }
    let labels: Vec<f64> = (0..tuples.len()).map(|i| i as f64).collect();
    let z = make_observable(&labels, &spaces, tol)?;
    Ok(JointObservable { z, tuples })
}

/// The joint observable of `X ⊗ 1` and `1 ⊗ Y` on `H_X ⊗ H_Y`, built directly
/// from product eigenspaces. Labels follow the same lexicographic order as
/// [`join_compatible`] applied to the two extended observables.
pub fn product_join(x: &Observable, y: &Observable) -> JointObservable {
    let mut tuples = Vec::with_capacity(x.len() * y.len());
    let mut spaces = Vec::with_capacity(x.len() * y.len());
    for (i, &a) in x.eigenvalues.iter().enumerate() {
        for (j, &b) in y.eigenvalues.iter().enumerate() {
            tuples.push(vec![a, b]);
            spaces.push(x.eigenspaces[i].kronecker(&y.eigenspaces[j]));
        }
    }
    let z = Observable {
        eigenvalues: (0..tuples.len()).map(|i| i as f64).collect(),
        eigenspaces: spaces,
        dim: x.dim * y.dim,
    };
    JointObservable { z, tuples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{conjugate_by, max_abs_diff};

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn diag(values: &[f64]) -> Observable {
        Observable::from_diagonal(values, &tol()).unwrap()
    }

    fn standard(dim: usize, cols: &[usize]) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(dim, cols.len(), ZERO);
        for (c, &i) in cols.iter().enumerate() {
            m[(i, c)] = ONE;
        }
        m
    }

    #[test]
    fn make_nondegenerate_and_degenerate() {
        let x = make_observable(&[1.0, 2.0], &[standard(2, &[0]), standard(2, &[1])], &tol())
            .unwrap();
        assert!(x.is_nondegenerate());
        assert_eq!(x.matrix(), ComplexOperator::from_real_diagonal(&[1.0, 2.0]));

        let five = make_observable(&[5.0], &[standard(2, &[0, 1])], &tol()).unwrap();
        assert!(!five.is_nondegenerate());
        assert_eq!(five.matrix(), ComplexOperator::from_real_diagonal(&[5.0, 5.0]));
    }

    #[test]
    fn make_rejects_duplicate_eigenvalue() {
        let r = make_observable(&[1.0, 1.0], &[standard(2, &[0]), standard(2, &[1])], &tol());
        assert_eq!(r, Err(Error::DuplicateEigenvalue(1.0)));
    }

    #[test]
    fn make_rejects_non_orthonormal() {
        let mut skew = standard(2, &[0]);
        skew[(1, 0)] = ONE;
        let r = make_observable(&[1.0, 2.0], &[skew, standard(2, &[1])], &tol());
        assert!(matches!(r, Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn projectors_resolve_identity() {
        let x = diag(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(x.eigenvalues(), &[1.0, 2.0, 3.0]);
        let sum = x.projectors().into_iter().fold(DMatrix::zeros(4, 4), |a, p| a + p);
        assert!(max_abs_diff(&sum, &DMatrix::identity(4, 4)) < 1e-15);
        let p = x.projectors();
        assert!(max_abs_diff(&(&p[0] * &p[2]), &DMatrix::zeros(4, 4)) < 1e-15);
        assert_eq!(x.rank(2), 2);
    }

    #[test]
    fn injective_function_reorders() {
        let x = diag(&[1.0, 2.0, 3.0]);
        let f = FunctionSpec::from_fn(x.eigenvalues(), |v| v * v).unwrap();
        assert!(f.is_injective(&tol()));
        let fx = apply_function(&x, &f, &tol()).unwrap();
        assert_eq!(fx.eigenvalues(), &[1.0, 4.0, 9.0]);
        assert_eq!(fx.projectors(), x.projectors());
    }

    #[test]
    fn many_to_one_function_merges_eigenspaces() {
        let x = diag(&[-1.0, 0.0, 1.0]);
        let f = FunctionSpec::from_fn(x.eigenvalues(), |v| v * v).unwrap();
        assert!(!f.is_injective(&tol()));
        let fx = apply_function(&x, &f, &tol()).unwrap();
        assert_eq!(fx.eigenvalues(), &[0.0, 1.0]);
        assert_eq!(fx.rank(1), 2);
        let expected = x.projector(0) + x.projector(2);
        assert!(max_abs_diff(&fx.projector(1), &expected) < 1e-15);
    }

    #[test]
    fn indicator_function_gives_eigenprojector() {
        let x = diag(&[0.5, 1.5, 2.5, 3.5]);
        let f = FunctionSpec::indicator(x.eigenvalues(), &[2.5], &tol());
        let fx = apply_function(&x, &f, &tol()).unwrap();
        assert_eq!(fx.eigenvalues(), &[0.0, 1.0]);
        assert!(max_abs_diff(&fx.projector(1), &x.projector(2)) < 1e-15);
    }

    #[test]
    fn partial_function_rejected() {
        let x = diag(&[1.0, 2.0]);
        let f = FunctionSpec::from_pairs([(1.0, 0.0)]).unwrap();
        assert_eq!(apply_function(&x, &f, &tol()), Err(Error::PartialFunction(2.0)));
    }

    #[test]
    fn identity_permutation_is_identity_matrix() {
        let x = diag(&[1.0, 2.0, 3.0]);
        let u = PermutationSpec::identity(x.eigenvalues(), &tol()).unwrap();
        let um = permutation_unitary(&x, &u, &tol()).unwrap();
        assert_eq!(um.matrix(), &ComplexOperator::identity(3));
    }

    #[test]
    fn swap_permutation_conjugates_diagonal() {
        let x = diag(&[1.0, 2.0]);
        let u = PermutationSpec::transposition(x.eigenvalues(), 1.0, 2.0, &tol()).unwrap();
        let um = permutation_unitary(&x, &u, &tol()).unwrap();
        let expected = ComplexOperator::new(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
            .unwrap();
        assert_eq!(um.matrix(), &expected);
        let conj = conjugate_by(um.matrix(), &x.matrix(), &tol()).unwrap();
        assert_eq!(conj, ComplexOperator::from_real_diagonal(&[2.0, 1.0]));
    }

    #[test]
    fn block_cycle_permutation_matrix() {
        // x1 ↔ x2 together with x'1 → x'2 → x'3 → x'1.
        let x = diag(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let u = PermutationSpec::from_cycles(
            x.eigenvalues(),
            &[vec![0.0, 1.0], vec![2.0, 3.0, 4.0]],
            &tol(),
        )
        .unwrap();
        let um = permutation_unitary(&x, &u, &tol()).unwrap();
        // Column i holds e_{u(i)}.
        let targets = [1usize, 0, 3, 4, 2];
        let mut expected = DMatrix::from_element(5, 5, ZERO);
        for (i, &t) in targets.iter().enumerate() {
            expected[(t, i)] = ONE;
        }
        assert_eq!(um.matrix().matrix(), &expected);
        // U†XU = u(X) as matrices.
        let conj = conjugate_by(um.matrix(), &x.matrix(), &tol()).unwrap();
        let ux = apply_function(&x, &u.as_function(), &tol()).unwrap();
        assert!(max_abs_diff(conj.matrix(), ux.matrix().matrix()) < 1e-12);
    }

    #[test]
    fn permutation_rejects_degenerate_and_foreign_domain() {
        let x = diag(&[1.0, 1.0, 2.0]);
        let u = PermutationSpec::identity(&[1.0, 2.0], &tol()).unwrap();
        assert_eq!(permutation_unitary(&x, &u, &tol()), Err(Error::Degenerate));
        let y = diag(&[1.0, 2.0, 3.0]);
        assert_eq!(permutation_unitary(&y, &u, &tol()), Err(Error::NotBijection));
        assert_eq!(
            PermutationSpec::new(&[1.0, 2.0], &[1.0, 1.0], &tol()),
            Err(Error::NotBijection)
        );
    }

    #[test]
    fn diagonal_phases() {
        let x = diag(&[1.0, 2.0]);
        let zero = FunctionSpec::from_fn(x.eigenvalues(), |_| 0.0).unwrap();
        let u0 = diagonal_phase_unitary(&x, &zero, &tol()).unwrap();
        assert_eq!(u0.matrix(), &ComplexOperator::identity(2));
        let pi = FunctionSpec::from_pairs([(1.0, 0.0), (2.0, std::f64::consts::PI)]).unwrap();
        let u = diagonal_phase_unitary(&x, &pi, &tol()).unwrap();
        let expected = ComplexOperator::from_real_diagonal(&[1.0, -1.0]);
        assert!(max_abs_diff(u.matrix().matrix(), expected.matrix()) < 1e-15);
    }

    #[test]
    fn diagonal_phases_partial() {
        let x = diag(&[1.0, 2.0]);
        let phases = FunctionSpec::from_pairs([(1.0, 0.3)]).unwrap();
        assert_eq!(
            diagonal_phase_unitary(&x, &phases, &tol()),
            Err(Error::PartialFunction(2.0))
        );
    }

    #[test]
    fn join_with_itself() {
        let x = diag(&[1.0, 2.0, 3.0]);
        let (z, f, g) = join_compatible(&x, &x, &tol()).unwrap();
        assert_eq!(z.len(), 3);
        assert_eq!(apply_function(&z, &f, &tol()).unwrap().matrix(), x.matrix());
        assert_eq!(apply_function(&z, &g, &tol()).unwrap().matrix(), x.matrix());
        // Z's spectral projectors are X's.
        assert_eq!(z.projectors(), x.projectors());
    }

    #[test]
    fn join_by_inspection() {
        let x = diag(&[1.0, 1.0, 2.0]);
        let y = diag(&[3.0, 4.0, 4.0]);
        let (z, f, g) = join_compatible(&x, &y, &tol()).unwrap();
        assert_eq!(z.eigenvalues(), &[0.0, 1.0, 2.0]);
        assert_eq!(f.table(), &[(0.0, 1.0), (1.0, 1.0), (2.0, 2.0)]);
        assert_eq!(g.table(), &[(0.0, 3.0), (1.0, 4.0), (2.0, 4.0)]);
        let fz = apply_function(&z, &f, &tol()).unwrap();
        let gz = apply_function(&z, &g, &tol()).unwrap();
        assert!(max_abs_diff(fz.matrix().matrix(), x.matrix().matrix()) < 1e-10);
        assert!(max_abs_diff(gz.matrix().matrix(), y.matrix().matrix()) < 1e-10);
    }

    #[test]
    fn join_rejects_non_commuting() {
        let x = diag(&[1.0, 2.0]);
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let basis = DMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
        let y = Observable::from_eigenbasis(&[1.0, 2.0], &basis, &tol()).unwrap();
        assert!(matches!(
            join_compatible(&x, &y, &tol()),
            Err(Error::NotCommuting { .. })
        ));
    }

    #[test]
    fn product_join_matches_generic_join() {
        let x = diag(&[-1.0, 2.0]);
        let y = diag(&[0.0, 1.0, 5.0]);
        let fast = product_join(&x, &y);
        let slow = join_all(&[x.extend_right(3), y.extend_left(2)], &tol()).unwrap();
        assert_eq!(fast.tuples, slow.tuples);
        for i in 0..fast.z.len() {
            assert!(max_abs_diff(&fast.z.projector(i), &slow.z.projector(i)) < 1e-12);
        }
    }

    #[test]
    fn describe_cycles() {
        let u = PermutationSpec::from_cycles(
            &[0.0, 1.0, 2.0, 3.0, 4.0],
            &[vec![0.0, 1.0], vec![2.0, 3.0, 4.0]],
            &tol(),
        )
        .unwrap();
        assert_eq!(u.describe(), "(0 1)(2 3 4)");
        assert_eq!(u.inverse().describe(), "(0 1)(2 4 3)");
    }
}
