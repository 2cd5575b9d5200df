//! Outcome laws and the Born-rule oracle.
//!
//! [`born_law`] is the reference model that the axiom checkers and the
//! derivation certificates are compared against. The derivation engine only
//! calls it after a law has been solved for, never while building constraints.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{check_dim, normalize, ComplexVector, State, C64};
use crate::observable::{group_by_value, join_all, FunctionSpec, Observable};
use crate::tolerance::TolerancePolicy;

/// Agreement required between a law recovered from mean values and the law that generated them.
pub const RECOVERY_TOLERANCE: f64 = 1e-8;

/// Condition number above which [`law_from_means`] refuses to solve.
pub const MAX_CONDITION: f64 = 1e12;

/// A finite discrete probability distribution on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementLaw {
    support: Vec<f64>,
    probabilities: Vec<f64>,
}

impl MeasurementLaw {
    pub fn new(support: Vec<f64>, probabilities: Vec<f64>, tol: &TolerancePolicy) -> Result<Self> {
        check_dim(support.len(), probabilities.len())?;
        if support.is_empty() {
            return Err(Error::Precondition("law with empty support".into()));
        }
        if support.iter().chain(&probabilities).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if support.windows(2).any(|w| !(w[0] < w[1]) || tol.same_value(w[0], w[1])) {
            return Err(Error::Precondition(
                "law support must be strictly increasing".into(),
            ));
        }
        if probabilities.iter().any(|&p| p < 0.0) {
            return Err(Error::Precondition("negative probability".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > tol.tol_law {
            return Err(Error::Precondition(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            support,
            probabilities,
        })
    }

    /// Builds a law from unsorted `(outcome, mass)` pairs, merging equal outcomes.
    pub fn from_masses(
        masses: impl IntoIterator<Item = (f64, f64)>,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        let groups = group_by_value(masses, tol);
        let support = groups.iter().map(|(x, _)| *x).collect();
        let probabilities = groups.iter().map(|(_, ps)| ps.iter().sum()).collect();
        Self::new(support, probabilities, tol)
    }

    pub fn point_mass(x: f64) -> Self {
        Self {
            support: vec![x],
            probabilities: vec![1.0],
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probabilities.iter().copied())
    }

    /// `Pr{outcome = x}`; zero off the support.
    pub fn probability_of(&self, x: f64, tol: &TolerancePolicy) -> f64 {
        self.iter()
            .filter(|(s, _)| tol.same_value(*s, x))
            .map(|(_, p)| p)
            .sum()
    }

    /// Sup-norm distance over the union of both supports.
    pub fn sup_distance(&self, other: &MeasurementLaw, tol: &TolerancePolicy) -> f64 {
        self.union_support(other, tol)
            .iter()
            .map(|&x| (self.probability_of(x, tol) - other.probability_of(x, tol)).abs())
            .fold(0.0, f64::max)
    }

    /// Total variation distance `½ Σ |p − q|`.
    pub fn tv_distance(&self, other: &MeasurementLaw, tol: &TolerancePolicy) -> f64 {
        0.5 * self
            .union_support(other, tol)
            .iter()
            .map(|&x| (self.probability_of(x, tol) - other.probability_of(x, tol)).abs())
            .sum::<f64>()
    }

    fn union_support(&self, other: &MeasurementLaw, tol: &TolerancePolicy) -> Vec<f64> {
        group_by_value(
            self.support.iter().chain(&other.support).map(|&x| (x, ())),
            tol,
        )
        .into_iter()
        .map(|(x, _)| x)
        .collect()
    }
}

/// `p(x) = ‖[X=x]ψ‖²` for every eigenvalue `x`, zeros included.
pub fn born_law(psi: &State, x: &Observable, tol: &TolerancePolicy) -> Result<MeasurementLaw> {
    check_dim(x.dim(), psi.dim())?;
    let probabilities = (0..x.len())
        .map(|i| x.projected_weight(i, psi.vector()))
        .collect();
    MeasurementLaw::new(x.eigenvalues().to_vec(), probabilities, tol)
}

/// The law of `f(outcome)`.
pub fn pushforward(
    law: &MeasurementLaw,
    f: &FunctionSpec,
    tol: &TolerancePolicy,
) -> Result<MeasurementLaw> {
    let masses = law
        .iter()
        .map(|(x, p)| f.eval(x, tol).map(|y| (y, p)))
        .collect::<Result<Vec<_>>>()?;
    MeasurementLaw::from_masses(masses, tol)
}

pub fn mean(law: &MeasurementLaw) -> f64 {
    law.iter().map(|(x, p)| x * p).sum()
}

/// Post-measurement state `[X=x]ψ / ‖[X=x]ψ‖`.
pub fn luders_update(
    psi: &State,
    x: &Observable,
    outcome: f64,
    tol: &TolerancePolicy,
) -> Result<State> {
    check_dim(x.dim(), psi.dim())?;
    let i = x
        .index_of(outcome, tol)
        .ok_or(Error::ZeroProbabilityOutcome(outcome))?;
    let projected = x.project(i, psi.vector());
    if projected.norm() <= tol.tol_norm {
        return Err(Error::ZeroProbabilityOutcome(outcome));
    }
    normalize(&ComplexVector::new(projected)?, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementOrder {
    FirstThenSecond,
    SecondThenFirst,
}

/// Joint law of two commuting observables measured one after the other with
/// Lüders updates in between, reported over the labels of their join.
pub fn sequential_law(
    psi: &State,
    first: &Observable,
    second: &Observable,
    order: MeasurementOrder,
    tol: &TolerancePolicy,
) -> Result<MeasurementLaw> {
    check_dim(first.dim(), psi.dim())?;
    let joint = join_all(&[first.clone(), second.clone()], tol)?;
    let (a, b) = match order {
        MeasurementOrder::FirstThenSecond => (first, second),
        MeasurementOrder::SecondThenFirst => (second, first),
    };
    let mut masses = vec![0.0; joint.z.len()];
    for (i, &ea) in a.eigenvalues().iter().enumerate() {
        let p = a.projected_weight(i, psi.vector());
        if p.sqrt() <= tol.tol_norm {
            continue;
        }
        let post = luders_update(psi, a, ea, tol)?;
        for (j, &eb) in b.eigenvalues().iter().enumerate() {
            let q = b.projected_weight(j, post.vector());
            let tuple = match order {
                MeasurementOrder::FirstThenSecond => [ea, eb],
                MeasurementOrder::SecondThenFirst => [eb, ea],
            };
            // Pairs outside the join carry (numerically) zero mass; the sum check catches anything else.
            if let Some(label) = joint.label_of(&tuple, tol) {
                masses[label as usize] += p * q;
            }
        }
    }
    MeasurementLaw::new(joint.z.eigenvalues().to_vec(), masses, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    /// `(outcome, count)` for every support point of the reference law.
    pub counts: Vec<(f64, u64)>,
    pub n: u64,
    pub empirical: MeasurementLaw,
    pub tv_distance: f64,
    pub seed: u64,
}

/// Draws `n` outcomes by inverse-CDF sampling from a ChaCha8 stream seeded with `seed`.
pub fn sample(
    law: &MeasurementLaw,
    n: u64,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<SampleReport> {
    if n == 0 {
        return Err(Error::Precondition("sample size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cdf: Vec<f64> = law
        .probabilities()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let last_positive = law
        .probabilities()
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(0);
    let mut counts = vec![0u64; cdf.len()];
    for _ in 0..n {
        let u: f64 = rng.random();
        let k = cdf.iter().position(|&c| u < c).unwrap_or(last_positive);
        counts[k] += 1;
    }
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    // Counts/n sums to one up to rounding; validate against the default law tolerance.
    let empirical = MeasurementLaw::new(law.support().to_vec(), probabilities, tol)?;
    let tv_distance = empirical.tv_distance(law, tol);
    Ok(SampleReport {
        counts: law.support().iter().copied().zip(counts).collect(),
        n,
        empirical,
        tv_distance,
        seed,
    })
}

/// Largest grid [`spectral_t_grid`] will build.
pub const MAX_GRID: usize = 1_000_000;

/// Integer grid `t = 0, 1, …, M` with `M = ⌈2/δ⌉ + 2k`, where `δ` is the
/// smallest gap between the arctangents of the `k` spectrum points.
///
/// The sampled exponentials `exp(i t θ)` then form a well-conditioned
/// family: for `M` well above `1/δ` the least-squares matrix has condition
/// number close to 1.
pub fn spectral_t_grid(spectrum: &[f64]) -> Result<Vec<f64>> {
    let mut angles: Vec<f64> = spectrum.iter().map(|x| x.atan()).collect();
    angles.sort_by(f64::total_cmp);
    let gap = angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(std::f64::consts::PI, f64::min);
    if !(gap > 0.0) {
        return Err(Error::Precondition(
            "spectrum points must have distinct arctangents".into(),
        ));
    }
    let m = (2.0 / gap).ceil() + 2.0 * spectrum.len() as f64;
    if m > MAX_GRID as f64 {
        return Err(Error::IllConditioned {
            condition: 1.0 / gap,
        });
    }
    Ok((0..=m as usize).map(|t| t as f64).collect())
}

/// Recovers a law on a known spectrum from the means `E[exp(i t arctan X)]`,
/// sampled on [`spectral_t_grid`].
pub fn law_from_means(
    mean_oracle: impl Fn(f64) -> C64,
    spectrum: &[f64],
    tol: &TolerancePolicy,
) -> Result<MeasurementLaw> {
    if spectrum.is_empty() {
        return Err(Error::Precondition("empty spectrum".into()));
    }
    let grid = spectral_t_grid(spectrum)?;
    law_from_means_on_grid(mean_oracle, spectrum, &grid, tol)
}

/// As [`law_from_means`], on a caller-supplied `t` grid.
///
/// Each `t` contributes a cosine row and a sine row; the probabilities are
/// the least-squares solution over all rows. The solve is refused when the
/// row matrix has condition number above [`MAX_CONDITION`], and the result
/// is rejected when any row is missed by more than [`RECOVERY_TOLERANCE`].
pub fn law_from_means_on_grid(
    mean_oracle: impl Fn(f64) -> C64,
    spectrum: &[f64],
    grid: &[f64],
    tol: &TolerancePolicy,
) -> Result<MeasurementLaw> {
    let k = spectrum.len();
    if k == 0 {
        return Err(Error::Precondition("empty spectrum".into()));
    }
    let mut points: Vec<f64> = spectrum.to_vec();
    points.sort_by(f64::total_cmp);
    let angles: Vec<f64> = points.iter().map(|x| x.atan()).collect();
    if angles.windows(2).any(|w| tol.same_value(w[0], w[1])) {
        return Err(Error::Precondition(
            "spectrum points must have distinct arctangents".into(),
        ));
    }
    if grid.len() * 2 < k {
        return Err(Error::Precondition(format!(
            "a grid of {} points gives too few rows for {k} unknowns",
            grid.len()
        )));
    }

    let rows = 2 * grid.len();
    let mut a = DMatrix::<f64>::zeros(rows, k);
    let mut b = nalgebra::DVector::<f64>::zeros(rows);
    for (j, &t) in grid.iter().enumerate() {
        let m = mean_oracle(t);
        if !m.re.is_finite() || !m.im.is_finite() {
            return Err(Error::NonFinite);
        }
        for (i, &theta) in angles.iter().enumerate() {
            a[(2 * j, i)] = (t * theta).cos();
            a[(2 * j + 1, i)] = (t * theta).sin();
        }
        b[2 * j] = m.re;
        b[2 * j + 1] = m.im;
    }

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let p = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Precondition(e.to_string()))?;

    let residual = (&a * &p - &b).amax();
    if residual > RECOVERY_TOLERANCE {
        return Err(Error::Infeasible { residual });
    }
    if p.iter().any(|&v| v < -RECOVERY_TOLERANCE) {
        return Err(Error::Infeasible {
            residual: -p.min(),
        });
    }
    let clamped: Vec<f64> = p.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if (total - 1.0).abs() > RECOVERY_TOLERANCE {
        return Err(Error::Infeasible {
            residual: (total - 1.0).abs(),
        });
    }
    MeasurementLaw::new(points, clamped.iter().map(|v| v / total).collect(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::conjugate_by;
    use crate::observable::{apply_function, permutation_unitary, diagonal_phase_unitary, Observable};
    use crate::random::{
        haar_unitary, instance_rng, random_commuting_pair, random_function, random_law,
        random_observable, random_permutation, random_phases, random_spectrum, random_state,
    };
    use proptest::prelude::*;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn diag(values: &[f64]) -> Observable {
        Observable::from_diagonal(values, &tol()).unwrap()
    }

    fn real_state(v: &[f64]) -> State {
        State::new(ComplexVector::from_real(v).unwrap(), &tol()).unwrap()
    }

    /// Characteristic-function oracle written from the cosine and sine sums.
    fn char_oracle(law: &MeasurementLaw) -> impl Fn(f64) -> C64 + '_ {
        move |t| {
            let re: f64 = law.iter().map(|(x, p)| p * (t * x.atan()).cos()).sum();
            let im: f64 = law.iter().map(|(x, p)| p * (t * x.atan()).sin()).sum();
            C64::new(re, im)
        }
    }

    #[test]
    fn born_examples() {
        let x = diag(&[1.0, 2.0, 3.0]);
        let eigen = x.eigenvector(1).unwrap();
        assert_eq!(born_law(&eigen, &x, &tol()).unwrap().probabilities(), &[0.0, 1.0, 0.0]);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pair = born_law(&real_state(&[h, h, 0.0]), &x, &tol()).unwrap();
        assert!((pair.probabilities()[0] - 0.5).abs() < 1e-15);
        assert!((pair.probabilities()[1] - 0.5).abs() < 1e-15);
        assert_eq!(pair.probabilities()[2], 0.0);
        assert_eq!(pair.support(), &[1.0, 2.0, 3.0]);

        let law = born_law(&real_state(&[0.5, 0.5, h]), &x, &tol()).unwrap();
        for (p, e) in law.probabilities().iter().zip([0.25, 0.25, 0.5]) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!((mean(&law) - 2.25).abs() < 1e-15);
    }

    #[test]
    fn born_dim_mismatch() {
        let x = diag(&[1.0, 2.0]);
        assert!(matches!(
            born_law(&real_state(&[1.0, 0.0, 0.0]), &x, &tol()),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn pushforward_examples() {
        let law = MeasurementLaw::new(vec![-1.0, 0.0, 1.0], vec![0.25, 0.5, 0.25], &tol()).unwrap();
        let id = FunctionSpec::identity(law.support());
        assert_eq!(pushforward(&law, &id, &tol()).unwrap(), law);
        let sq = FunctionSpec::from_fn(law.support(), |x| x * x).unwrap();
        let out = pushforward(&law, &sq, &tol()).unwrap();
        assert_eq!(out.support(), &[0.0, 1.0]);
        assert_eq!(out.probabilities(), &[0.5, 0.5]);
        let c = FunctionSpec::from_fn(law.support(), |_| 3.0).unwrap();
        assert_eq!(pushforward(&law, &c, &tol()).unwrap(), MeasurementLaw::point_mass(3.0));
        let partial = FunctionSpec::from_pairs([(-1.0, 0.0)]).unwrap();
        assert_eq!(pushforward(&law, &partial, &tol()), Err(Error::PartialFunction(0.0)));
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean(&MeasurementLaw::point_mass(7.0)), 7.0);
        let law = MeasurementLaw::new(vec![3.0, 8.0], vec![0.5, 0.5], &tol()).unwrap();
        assert_eq!(mean(&law), 5.5);
    }

    #[test]
    fn law_validation() {
        assert!(MeasurementLaw::new(vec![1.0, 0.0], vec![0.5, 0.5], &tol()).is_err());
        assert!(MeasurementLaw::new(vec![0.0, 1.0], vec![0.6, 0.5], &tol()).is_err());
        assert!(MeasurementLaw::new(vec![0.0, 1.0], vec![1.5, -0.5], &tol()).is_err());
        let merged = MeasurementLaw::from_masses([(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)], &tol())
            .unwrap();
        assert_eq!(merged.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn luders_examples() {
        let x = diag(&[1.0, 2.0]);
        let eigen = x.eigenvector(0).unwrap();
        let post = luders_update(&eigen, &x, 1.0, &tol()).unwrap();
        assert!(post.ray_distance(&eigen) < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let post = luders_update(&real_state(&[h, h]), &x, 1.0, &tol()).unwrap();
        assert!(post.ray_distance(&eigen) < 1e-15);
        assert_eq!(
            luders_update(&eigen, &x, 2.0, &tol()),
            Err(Error::ZeroProbabilityOutcome(2.0))
        );
    }

    #[test]
    fn sequential_with_trivial_second() {
        let mut rng = instance_rng(1, 0);
        let x = random_observable(4, false, &mut rng);
        let psi = random_state(4, &mut rng);
        let id = diag(&[2.0, 2.0, 2.0, 2.0]);
        let seq = sequential_law(&psi, &x, &id, MeasurementOrder::FirstThenSecond, &tol()).unwrap();
        let direct = born_law(&psi, &x, &tol()).unwrap();
        assert_eq!(seq.probabilities().len(), direct.probabilities().len());
        for (a, b) in seq.probabilities().iter().zip(direct.probabilities()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sequential_orders_agree_with_joint() {
        let mut rng = instance_rng(2, 0);
        let (x, y) = random_commuting_pair(6, &mut rng);
        let psi = random_state(6, &mut rng);
        let a = sequential_law(&psi, &x, &y, MeasurementOrder::FirstThenSecond, &tol()).unwrap();
        let b = sequential_law(&psi, &x, &y, MeasurementOrder::SecondThenFirst, &tol()).unwrap();
        let joint = join_all(&[x, y], &tol()).unwrap();
        let z = born_law(&psi, &joint.z, &tol()).unwrap();
        assert!(a.sup_distance(&b, &tol()) <= 1e-10);
        assert!(a.sup_distance(&z, &tol()) <= 1e-10);
    }

    #[test]
    fn sequential_on_product_system() {
        let mut rng = instance_rng(3, 0);
        let x = random_observable(2, false, &mut rng);
        let y = random_observable(3, false, &mut rng);
        let psi = random_state(6, &mut rng);
        let (xe, ye) = (x.extend_right(3), y.extend_left(2));
        let seq = sequential_law(&psi, &xe, &ye, MeasurementOrder::FirstThenSecond, &tol()).unwrap();
        let joint = crate::observable::product_join(&x, &y);
        let z = born_law(&psi, &joint.z, &tol()).unwrap();
        assert!(seq.sup_distance(&z, &tol()) <= 1e-10);
    }

    #[test]
    fn sequential_rejects_non_commuting() {
        let mut rng = instance_rng(4, 0);
        let x = random_observable(3, false, &mut rng);
        let y = random_observable(3, false, &mut rng);
        let psi = random_state(3, &mut rng);
        assert!(matches!(
            sequential_law(&psi, &x, &y, MeasurementOrder::FirstThenSecond, &tol()),
            Err(Error::NotCommuting { .. })
        ));
    }

    #[test]
    fn sample_examples() {
        let r = sample(&MeasurementLaw::point_mass(4.0), 1000, 3, &tol()).unwrap();
        assert_eq!(r.counts, vec![(4.0, 1000)]);
        assert_eq!(r.tv_distance, 0.0);
        let half = MeasurementLaw::new(vec![0.0, 1.0], vec![0.5, 0.5], &tol()).unwrap();
        let r = sample(&half, 100_000, 11, &tol()).unwrap();
        assert!(r.tv_distance <= 0.01);
        assert_eq!(r.counts.iter().map(|c| c.1).sum::<u64>(), 100_000);
        assert_eq!(r, sample(&half, 100_000, 11, &tol()).unwrap());
        assert!(matches!(sample(&half, 0, 1, &tol()), Err(Error::Precondition(_))));
    }

    #[test]
    fn sample_skips_zero_mass_outcomes() {
        let law = MeasurementLaw::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.5, 0.0], &tol()).unwrap();
        let r = sample(&law, 10_000, 5, &tol()).unwrap();
        assert_eq!(r.counts[2].1, 0);
    }

    #[test]
    fn means_point_mass() {
        let law = law_from_means(|_| C64::new(1.0, 0.0), &[0.0], &tol()).unwrap();
        assert_eq!(law, MeasurementLaw::point_mass(0.0));
    }

    #[test]
    fn means_two_point() {
        let truth = MeasurementLaw::new(vec![-1.0, 1.0], vec![0.5, 0.5], &tol()).unwrap();
        let law = law_from_means(char_oracle(&truth), &[-1.0, 1.0], &tol()).unwrap();
        assert!(law.sup_distance(&truth, &tol()) <= 1e-12);
    }

    #[test]
    fn spectral_grid_size() {
        let grid = spectral_t_grid(&[-1.0, 1.0]).unwrap();
        // Arctangent gap π/2: M = ⌈4/π⌉ + 4 = 6.
        assert_eq!(grid, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn means_duplicate_arctan() {
        assert!(matches!(
            law_from_means(|_| C64::new(1.0, 0.0), &[1.0, 1.0], &tol()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn means_random_laws() {
        let mut worst: f64 = 0.0;
        for i in 0..300 {
            let mut rng = instance_rng(77, i);
            let k = 1 + (i as usize % 8);
            let spectrum = random_spectrum(k, &mut rng);
            let truth = random_law(&spectrum, &mut rng);
            let law = law_from_means(char_oracle(&truth), &spectrum, &tol()).unwrap();
            worst = worst.max(law.sup_distance(&truth, &tol()));
        }
        assert!(worst <= RECOVERY_TOLERANCE, "{worst}");
    }

    #[test]
    fn means_ill_conditioned_grid() {
        let spectrum = [0.0, 1.0, 2.0];
        let grid = [1e-9, 2e-9];
        let truth = MeasurementLaw::new(spectrum.to_vec(), vec![0.2, 0.3, 0.5], &tol()).unwrap();
        assert!(matches!(
            law_from_means_on_grid(char_oracle(&truth), &spectrum, &grid, &tol()),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn zero_one_equivalence() {
        let mut rng = instance_rng(6, 0);
        for _ in 0..50 {
            let x = random_observable(5, true, &mut rng);
            let psi = random_state(5, &mut rng);
            let pick = x.eigenvalues()[0];
            let f = FunctionSpec::indicator(x.eigenvalues(), &[pick], &tol());
            let lhs = pushforward(&born_law(&psi, &x, &tol()).unwrap(), &f, &tol()).unwrap();
            let rhs = born_law(&psi, &apply_function(&x, &f, &tol()).unwrap(), &tol()).unwrap();
            let mean_gap = (mean(&lhs) - mean(&rhs)).abs();
            let law_gap = lhs.sup_distance(&rhs, &tol());
            // Both laws live on {0, 1}, so the mean is the mass at 1.
            assert!(mean_gap <= 1e-12 && law_gap <= 1e-12);
            assert!((mean(&lhs) - lhs.probability_of(1.0, &tol())).abs() < 1e-15);
            assert!((mean(&rhs) - rhs.probability_of(1.0, &tol())).abs() < 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn functional_invariance_sound(seed in any::<u64>(), d in 2usize..=12, injective in any::<bool>()) {
            let mut rng = instance_rng(seed, 0);
            let x = random_observable(d, true, &mut rng);
            let psi = random_state(d, &mut rng);
            let f = random_function(x.eigenvalues(), injective, &mut rng);
            let lhs = pushforward(&born_law(&psi, &x, &tol()).unwrap(), &f, &tol()).unwrap();
            let rhs = born_law(&psi, &apply_function(&x, &f, &tol()).unwrap(), &tol()).unwrap();
            prop_assert!(lhs.sup_distance(&rhs, &tol()) <= 1e-10);
        }

        #[test]
        fn unitary_invariance_sound(seed in any::<u64>(), d in 2usize..=12, kind in 0u8..3) {
            let mut rng = instance_rng(seed, 0);
            let x = random_observable(d, kind == 2, &mut rng);
            let psi = random_state(d, &mut rng);
            let u = match kind {
                0 => permutation_unitary(&x, &random_permutation(x.eigenvalues(), &mut rng), &tol()).unwrap(),
                1 => diagonal_phase_unitary(&x, &random_phases(x.eigenvalues(), &mut rng), &tol()).unwrap(),
                _ => haar_unitary(d, &mut rng),
            };
            let lhs = born_law(&u.apply(&psi, &tol()).unwrap(), &x, &tol()).unwrap();
            let rhs = born_law(&psi, &x.conjugated(&u).unwrap(), &tol()).unwrap();
            prop_assert!(lhs.sup_distance(&rhs, &tol()) <= 1e-10);
            // The conjugated observable is U†XU as a matrix.
            let dense = conjugate_by(u.matrix(), &x.matrix(), &tol()).unwrap();
            prop_assert!(crate::hilbert::max_abs_diff(dense.matrix(), x.conjugated(&u).unwrap().matrix().matrix()) <= 1e-9);
        }

        #[test]
        fn global_phase_invariant(seed in any::<u64>(), d in 1usize..=10, theta in -10.0f64..10.0) {
            let mut rng = instance_rng(seed, 0);
            let x = random_observable(d, true, &mut rng);
            let psi = random_state(d, &mut rng);
            let a = born_law(&psi, &x, &tol()).unwrap();
            let b = born_law(&psi.with_global_phase(theta), &x, &tol()).unwrap();
            prop_assert!(a.sup_distance(&b, &tol()) <= 1e-15);
        }

        #[test]
        fn sample_reproducible(seed in any::<u64>(), n in 1u64..2000) {
            let mut rng = instance_rng(seed, 1);
            let spectrum = random_spectrum(4, &mut rng);
            let law = random_law(&spectrum, &mut rng);
            let a = sample(&law, n, seed, &tol()).unwrap();
            let b = sample(&law, n, seed, &tol()).unwrap();
            prop_assert_eq!(a.counts.iter().map(|c| c.1).sum::<u64>(), n);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn means_round_trip(seed in any::<u64>(), k in 1usize..=8) {
            let mut rng = instance_rng(seed, 2);
            let spectrum = random_spectrum(k, &mut rng);
            let truth = random_law(&spectrum, &mut rng);
            let law = law_from_means(char_oracle(&truth), &spectrum, &tol()).unwrap();
            prop_assert!(law.sup_distance(&truth, &tol()) <= RECOVERY_TOLERANCE);
        }
    }
}
