//! Scenario files: a state, an observable and optional axiom instances in JSON.

use std::path::Path;

use bornforge::hilbert::ComplexVector;
use bornforge::nalgebra::DMatrix;
use bornforge::observable::{diagonal_phase_unitary, permutation_unitary};
use bornforge::{
    FunctionSpec, Observable, PermutationSpec, State, TolerancePolicy, UnitaryMap, C64,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub eigenvalues: Vec<f64>,
    /// Eigenvector columns, one per eigenvalue. Omitted means the computational basis.
    #[serde(default)]
    pub basis: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dim: usize,
    #[serde(default)]
    pub state: Option<Vec<[f64; 2]>>,
    pub observable: ObservableSpec,
    /// Function table as `[x, f(x)]` pairs.
    #[serde(default)]
    pub function: Option<Vec<[f64; 2]>>,
    /// Permutation of the spectrum as `[x, u(x)]` pairs.
    #[serde(default)]
    pub permutation: Option<Vec<[f64; 2]>>,
    /// Phase per eigenvalue as `[x, theta]` pairs.
    #[serde(default)]
    pub phases: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn field(name: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("scenario field `{name}`: {err}"))
}

fn complex(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|[re, im]| C64::new(*re, *im)).collect()
}

fn columns_to_matrix(d: usize, cols: &[Vec<C64>]) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| cols[j][i])
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn state(&self, tol: &TolerancePolicy) -> Result<State, CliError> {
        let amps = self
            .state
            .as_ref()
            .ok_or_else(|| field("state", "missing"))?;
        if amps.len() != self.dim {
            return Err(field(
                "state",
                format!("has {} entries, dim is {}", amps.len(), self.dim),
            ));
        }
        let v = ComplexVector::from_slice(&complex(amps)).map_err(|e| field("state", e))?;
        State::new(v, tol).map_err(|e| field("state", e))
    }

    pub fn observable(&self, tol: &TolerancePolicy) -> Result<Observable, CliError> {
        let spec = &self.observable;
        let d = self.dim;
        if spec.eigenvalues.len() != d {
            return Err(field(
                "observable.eigenvalues",
                format!("has {} entries, dim is {d}", spec.eigenvalues.len()),
            ));
        }
        let basis = match &spec.basis {
            None => columns_to_matrix(
                d,
                &(0..d)
                    .map(|j| (0..d).map(|i| C64::new(f64::from(u8::from(i == j)), 0.0)).collect())
                    .collect::<Vec<_>>(),
            ),
            Some(cols) => {
                if cols.len() != d || cols.iter().any(|c| c.len() != d) {
                    return Err(field("observable.basis", format!("expected {d} columns of length {d}")));
                }
                columns_to_matrix(d, &cols.iter().map(|c| complex(c)).collect::<Vec<_>>())
            }
        };
        Observable::from_eigenbasis(&spec.eigenvalues, &basis, tol)
            .map_err(|e| field("observable", e))
    }

    pub fn function(&self) -> Result<Option<FunctionSpec>, CliError> {
        self.function
            .as_ref()
            .map(|pairs| {
                FunctionSpec::from_pairs(pairs.iter().map(|[x, y]| (*x, *y)))
                    .map_err(|e| field("function", e))
            })
            .transpose()
    }

    pub fn permutation_unitary(
        &self,
        x: &Observable,
        tol: &TolerancePolicy,
    ) -> Result<Option<UnitaryMap>, CliError> {
        let Some(pairs) = &self.permutation else {
            return Ok(None);
        };
        let domain: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
        let images: Vec<f64> = pairs.iter().map(|p| p[1]).collect();
        let perm = PermutationSpec::new(&domain, &images, tol).map_err(|e| field("permutation", e))?;
        permutation_unitary(x, &perm, tol)
            .map(Some)
            .map_err(|e| field("permutation", e))
    }

    pub fn phase_unitary(
        &self,
        x: &Observable,
        tol: &TolerancePolicy,
    ) -> Result<Option<UnitaryMap>, CliError> {
        let Some(pairs) = &self.phases else {
            return Ok(None);
        };
        let phases = FunctionSpec::from_pairs(pairs.iter().map(|[x, t]| (*x, *t)))
            .map_err(|e| field("phases", e))?;
        diagonal_phase_unitary(x, &phases, tol)
            .map(Some)
            .map_err(|e| field("phases", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Scenario {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn explicit_basis_columns() {
        let s = parse(
            r#"{"dim": 2, "state": [[1, 0], [0, 0]],
                "observable": {"eigenvalues": [-1, 1],
                               "basis": [[[0.7071067811865476, 0], [0.7071067811865476, 0]],
                                         [[0.7071067811865476, 0], [-0.7071067811865476, 0]]]}}"#,
        );
        let tol = TolerancePolicy::default();
        let x = s.observable(&tol).unwrap();
        let v = x.eigenvector(0).unwrap();
        assert!((v.amplitudes()[1].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(s.state(&tol).is_ok());
    }

    #[test]
    fn rejects_non_orthonormal_basis() {
        let s = parse(
            r#"{"dim": 2, "observable": {"eigenvalues": [0, 1], "basis": [[[1, 0], [0, 0]], [[1, 0], [0, 0]]]}}"#,
        );
        let err = s.observable(&TolerancePolicy::default()).unwrap_err();
        assert!(err.to_string().contains("observable"));
        assert!(matches!(s.state(&TolerancePolicy::default()), Err(CliError::Input(_))));
    }
}
