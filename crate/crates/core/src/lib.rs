//! Finite-dimensional verification engine for measurement axioms and the
//! Born rule.
//!
//! * [`hilbert`]: states, operators, tensor products.
//! * [`observable`]: spectral observables, functions of observables,
//!   permutation and phase unitaries, joint observables.
//! * [`measurement`]: Born laws, pushforwards, sequential measurement,
//!   sampling, and recovery of a law from characteristic-function means.
//! * [`axioms`]: executable axiom checks and the randomized suite.
//! * [`derivation`]: constraint systems and derivation certificates.
//! * [`gleason`]: frame functions and density-matrix reconstruction.

pub mod axioms;
pub mod derivation;
pub mod error;
pub mod gleason;
pub mod hilbert;
pub mod measurement;
pub mod observable;
pub mod random;
pub mod tolerance;

/// Linear algebra types appear in the public API (eigenbases, projectors, density matrices).
pub use nalgebra;
pub use error::{Error, Result};
pub use hilbert::{ComplexOperator, ComplexVector, State, C64};
pub use measurement::MeasurementLaw;
pub use observable::{FunctionSpec, Observable, PermutationSpec, UnitaryMap, UnitaryTag};
pub use tolerance::TolerancePolicy;
