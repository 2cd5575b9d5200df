//! Seeded generators for random test instances.
//!
//! Every generator takes an explicit RNG; [`instance_rng`] derives an
//! independent ChaCha8 stream per instance index so that suites can run
//! instances in any order and still be reproducible.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::Result;
use crate::gleason::{DensityMatrix, Projector};
use crate::hilbert::{normalize, ComplexOperator, ComplexVector, State, C64};
use crate::measurement::MeasurementLaw;
use crate::observable::{make_observable, FunctionSpec, Observable, PermutationSpec, UnitaryMap};
use crate::tolerance::TolerancePolicy;

pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Uniformly distributed pure state (normalized complex Gaussian vector).
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> State {
    let v: Vec<C64> = (0..dim).map(|_| complex_normal(rng)).collect();
    normalize(
        &ComplexVector::from_slice(&v).expect("gaussian samples are finite"),
        &TolerancePolicy::default(),
    )
    .expect("gaussian vector is nonzero almost surely")
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of `R`'s diagonal removed.
pub fn haar_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryMap {
    UnitaryMap::general(
        ComplexOperator::new(haar_matrix(dim, rng)).expect("finite square matrix"),
        &TolerancePolicy::default(),
    )
    .expect("QR factor is unitary")
}

/// `k` distinct reals, at least 0.05 apart, drawn from `[-5, 5]` on a 1e-3 grid.
pub fn random_spectrum<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(k);
    while out.len() < k {
        let v = (rng.random_range(-5000..=5000) as f64) / 1000.0;
        if out.iter().all(|&w| (w - v).abs() >= 0.05) {
            out.push(v);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Random observable with a Haar-random eigenbasis. When `degenerate` is set
/// the basis columns are split into between 1 and `dim` random groups.
pub fn random_observable<R: Rng + ?Sized>(dim: usize, degenerate: bool, rng: &mut R) -> Observable {
    let basis = haar_matrix(dim, rng);
    let groups = if degenerate {
        rng.random_range(1..=dim)
    } else {
        dim
    };
    let mut sizes = vec![1usize; groups];
    for _ in groups..dim {
        let g = rng.random_range(0..groups);
        sizes[g] += 1;
    }
    let eigenvalues = random_spectrum(groups, rng);
    let mut spaces = Vec::with_capacity(groups);
    let mut c = 0;
    for s in sizes {
        spaces.push(basis.columns(c, s).into_owned());
        c += s;
    }
    make_observable(&eigenvalues, &spaces, &TolerancePolicy::default())
        .expect("Haar columns are orthonormal")
}

/// Random function table on `domain`: a shuffled affine image when
/// `injective`, otherwise values drawn from a set smaller than the domain.
pub fn random_function<R: Rng + ?Sized>(domain: &[f64], injective: bool, rng: &mut R) -> FunctionSpec {
    if injective {
        let mut values = random_spectrum(domain.len(), rng);
        values.shuffle(rng);
        FunctionSpec::from_pairs(domain.iter().copied().zip(values)).expect("distinct domain")
    } else {
        let range = (domain.len() / 2).max(1);
        let values = random_spectrum(range, rng);
        FunctionSpec::from_pairs(
            domain
                .iter()
                .map(|&x| (x, values[rng.random_range(0..range)])),
        )
        .expect("distinct domain")
    }
}

pub fn random_permutation<R: Rng + ?Sized>(domain: &[f64], rng: &mut R) -> PermutationSpec {
    let mut images = domain.to_vec();
    images.shuffle(rng);
    PermutationSpec::new(domain, &images, &TolerancePolicy::default()).expect("shuffle is a bijection")
}

/// Independent uniform angles in `[-π, π)` for each point of `domain`.
pub fn random_phases<R: Rng + ?Sized>(domain: &[f64], rng: &mut R) -> FunctionSpec {
    FunctionSpec::from_fn(domain, |_| 0.0)
        .and_then(|f| {
            FunctionSpec::from_pairs(
                f.table()
                    .iter()
                    .map(|&(x, _)| (x, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))),
            )
        })
        .expect("distinct domain")
}

/// Law with exponential (flat Dirichlet) weights on `support`.
pub fn random_law<R: Rng + ?Sized>(support: &[f64], rng: &mut R) -> MeasurementLaw {
    let w: Vec<f64> = support.iter().map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    MeasurementLaw::new(
        support.to_vec(),
        w.iter().map(|x| x / total).collect(),
        &TolerancePolicy::default(),
    )
    .expect("normalized weights")
}

/// Random density matrix `G G† / tr(G G†)` with `G` a `dim × rank` Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    let g = DMatrix::from_fn(dim, rank.max(1), |_, _| complex_normal(rng));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    DensityMatrix::new(rho / tr, &TolerancePolicy::default())
}

/// A random orthogonal resolution of the identity: Haar basis columns split
/// into between 1 and `dim` consecutive groups, one projector per group.
pub fn random_resolution<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Projector> {
    let basis = haar_matrix(dim, rng);
    let groups = rng.random_range(1..=dim);
    let mut cuts: Vec<usize> = (1..dim).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(groups - 1).collect();
    cuts.push(0);
    cuts.push(dim);
    cuts.sort_unstable();
    cuts.windows(2)
        .map(|w| {
            Projector::onto_columns(&basis.columns(w[0], w[1] - w[0]).into_owned(), &TolerancePolicy::default())
                .expect("Haar columns are orthonormal")
        })
        .collect()
}

/// Two commuting observables sharing a random eigenbasis, each with a few
/// (typically degenerate) eigenvalues.
pub fn random_commuting_pair<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> (Observable, Observable) {
    let basis = haar_matrix(dim, rng);
    let make = |rng: &mut R| {
        let levels = rng.random_range(1..=dim.min(4));
        let values = random_spectrum(levels, rng);
        let labels: Vec<f64> = (0..dim).map(|_| values[rng.random_range(0..levels)]).collect();
        observable_on_basis(&basis, &labels)
    };
    let x = make(rng);
    let y = make(rng);
    (x, y)
}

/// The observable `Σ labels[i] |b_i⟩⟨b_i|` for the columns `b_i` of `basis`.
pub fn observable_on_basis(basis: &DMatrix<C64>, labels: &[f64]) -> Observable {
    let tol = TolerancePolicy::default();
    let mut distinct: Vec<f64> = labels.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let spaces: Vec<DMatrix<C64>> = distinct
        .iter()
        .map(|&v| {
            let cols: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == v).collect();
            DMatrix::from_fn(basis.nrows(), cols.len(), |r, c| basis[(r, cols[c])])
        })
        .collect();
    make_observable(&distinct, &spaces, &tol).expect("columns of a unitary")
}
