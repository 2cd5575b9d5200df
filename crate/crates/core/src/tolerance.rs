use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every numeric comparison in the crate goes through one of these thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub tol_norm: f64,
    pub tol_herm: f64,
    pub tol_unitary: f64,
    pub tol_law: f64,
    /// Two function values closer than this are the same eigenvalue.
    pub tol_merge: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            tol_norm: 1e-10,
            tol_herm: 1e-10,
            tol_unitary: 1e-10,
            tol_law: 1e-10,
            tol_merge: 1e-12,
        }
    }
}

impl TolerancePolicy {
    pub fn new(
        tol_norm: f64,
        tol_herm: f64,
        tol_unitary: f64,
        tol_law: f64,
        tol_merge: f64,
    ) -> Result<Self> {
        let policy = Self {
            tol_norm,
            tol_herm,
            tol_unitary,
            tol_law,
            tol_merge,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn with_law_tolerance(self, tol_law: f64) -> Result<Self> {
        let policy = Self { tol_law, ..self };
        policy.validate()?;
        Ok(policy)
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.tol_norm,
            self.tol_herm,
            self.tol_unitary,
            self.tol_law,
            self.tol_merge,
        ];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(Error::Precondition(
                "tolerances must be finite and strictly positive".into(),
            ))
        }
    }

    /// Whether two real labels (eigenvalues, function values) coincide.
    pub fn same_value(&self, a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= self.tol_merge * a.abs().max(b.abs()).max(1.0)
    }
}
