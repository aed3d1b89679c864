use thiserror::Error;

/// Errors produced by model construction, simulation and the solver pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("qubit count mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not in SO({dim}) (deviation {deviation:.3e})")]
    NotSpecialOrthogonal { dim: usize, deviation: f64 },

    #[error("parameter vector has wrong length: expected {expected}, got {got}")]
    ParamCount { expected: usize, got: usize },

    #[error("objective has no sign change over [{lo}, {hi}]: f(lo)={flo:.6e}, f(hi)={fhi:.6e}")]
    NoSignChange { lo: f64, hi: f64, flo: f64, fhi: f64 },

    #[error("charge sector {sector} is empty for {n_qubits} qubits")]
    SectorEmpty { sector: i64, n_qubits: usize },

    #[error("requested {requested} eigenpairs but sector dimension is {dim}")]
    TooManyEigenpairs { requested: usize, dim: usize },

    #[error("phase classification undetermined: |<S_R>| = {magnitude:.3e} below floor {floor:.3e}")]
    PhaseUndetermined { magnitude: f64, floor: f64 },

    #[error("solver did not converge: {0}")]
    Convergence(String),

    #[error("all optimization seeds failed")]
    AllSeedsFailed,

    #[error("branch norm {norm:.3e} below threshold; projection is degenerate")]
    DegenerateBranch { norm: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
