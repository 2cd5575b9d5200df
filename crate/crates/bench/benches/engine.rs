use bornforge::derivation::{derive_dyadic, derive_equal_weight, equal_weight_state};
use bornforge::gleason::{frame_from_state, reconstruct_density, spanning_projectors, DensityMatrix};
use bornforge::measurement::{born_law, law_from_means};
use bornforge::random::{instance_rng, random_law, random_observable, random_spectrum, random_state};
use bornforge::{Observable, TolerancePolicy, C64};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn born(c: &mut Criterion) {
    let tol = TolerancePolicy::default();
    let mut group = c.benchmark_group("born_law");
    for d in [4usize, 16, 64] {
        let mut rng = instance_rng(1, d as u64);
        let x = random_observable(d, false, &mut rng);
        let psi = random_state(d, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| born_law(black_box(&psi), &x, &tol).unwrap())
        });
    }
    group.finish();
}

fn derivations(c: &mut Criterion) {
    let tol = TolerancePolicy::default();
    let mut group = c.benchmark_group("derive");
    for d in [8usize, 32] {
        let x = Observable::from_diagonal(&(0..d).map(|i| i as f64).collect::<Vec<_>>(), &tol).unwrap();
        let support = [0.0, 1.0, 2.0];
        let psi = equal_weight_state(&support, &x, &tol).unwrap();
        group.bench_with_input(BenchmarkId::new("equal_weight", d), &d, |b, _| {
            b.iter(|| derive_equal_weight(&support, &x, black_box(&psi), &tol).unwrap())
        });
    }
    let x = Observable::from_diagonal(&[0.0, 1.0], &tol).unwrap();
    for k in [3u32, 6] {
        group.bench_with_input(BenchmarkId::new("dyadic", k), &k, |b, &k| {
            b.iter(|| derive_dyadic(black_box(1), k, 0.0, 1.0, &x, &tol).unwrap())
        });
    }
    group.finish();
}

fn reconstruction(c: &mut Criterion) {
    let tol = TolerancePolicy::default();
    let mut group = c.benchmark_group("reconstruct_density");
    for d in [3usize, 6] {
        let rho = DensityMatrix::pure(&random_state(d, &mut instance_rng(2, d as u64)));
        let frame = frame_from_state(&rho, &spanning_projectors(d).unwrap(), &tol).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| reconstruct_density(black_box(&frame), &tol).unwrap())
        });
    }
    group.finish();
}

fn means(c: &mut Criterion) {
    let tol = TolerancePolicy::default();
    let mut rng = instance_rng(3, 0);
    let spectrum = random_spectrum(8, &mut rng);
    let law = random_law(&spectrum, &mut rng);
    let oracle = |t: f64| law.iter().map(|(x, p)| C64::from_polar(p, t * x.atan())).sum::<C64>();
    c.bench_function("law_from_means/8", |b| {
        b.iter(|| law_from_means(oracle, black_box(&spectrum), &tol).unwrap())
    });
}

criterion_group!(benches, born, derivations, reconstruction, means);
criterion_main!(benches);
