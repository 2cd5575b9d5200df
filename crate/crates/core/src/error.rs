use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector has (numerically) zero norm")]
    ZeroVector,
    #[error("entry is not finite")]
    NonFinite,
    #[error("vector is not normalized: norm {norm}")]
    NotNormalized { norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("operator is not unitary: |U^dag U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },
    #[error("operator is not hermitian: |A - A^dag| = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("basis columns are not orthonormal: |B^dag B - I| = {deviation:e}")]
    NotOrthonormal { deviation: f64 },
    #[error("eigenvalue {0} appears in more than one group")]
    DuplicateEigenvalue(f64),
    #[error("function is not defined at eigenvalue {0}")]
    PartialFunction(f64),
    #[error("observable is degenerate; a nondegenerate spectrum is required")]
    Degenerate,
    #[error("map is not a bijection of the spectrum")]
    NotBijection,
    #[error("observables do not commute: |XY - YX| = {deviation:e}")]
    NotCommuting { deviation: f64 },
    #[error("outcome {0} has zero probability")]
    ZeroProbabilityOutcome(f64),
    #[error("linear system is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("axiom instance not applicable: {0}")]
    InstanceNotApplicable(String),
    #[error("constraint system is infeasible (residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("projector family spans rank {rank}, need {required}")]
    InsufficientSpan { rank: usize, required: usize },
    #[error("reconstructed operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("frame function is inconsistent with any density matrix (residual {residual:e})")]
    InconsistentFrame { residual: f64 },
    #[error("projector family is not pairwise orthogonal: |P_i P_j| = {deviation:e}")]
    NotOrthogonalFamily { deviation: f64 },
    #[error("matrix is not an orthogonal projector: {0}")]
    NotProjector(String),
    #[error("projector is not in the frame function's domain")]
    NotEvaluable,
    #[error("precondition violated: {0}")]
    Precondition(String),
}
