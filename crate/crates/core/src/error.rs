use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("requested {requested} qubits exceeds the configured maximum of {max}")]
    Capacity { requested: usize, max: usize },

    #[error("basis is not orthonormal: tr(G_{i} G_{j}) = {value:.3e}")]
    InvalidBasis { i: usize, j: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("not a density matrix: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parameter vector norm {0:.3e} is below the degenerate-parameter guard")]
    DegenerateParameter(f64),

    #[error(
        "state is on the boundary of the state space (smallest eigenvalue {min_eigenvalue:.3e}); \
         only strictly positive definite states have a signed Cholesky parameterization"
    )]
    BoundaryState { min_eigenvalue: f64 },

    #[error(
        "measurement set is not informationally complete: B has rank {rank}, {required} required"
    )]
    NotInformationallyComplete { rank: usize, required: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all {runs} runs failed the stationarity screen (best gradient norm {best_grad_norm:.3e}, reasons: {reasons})")]
    AllRunsFailed {
        runs: usize,
        best_grad_norm: f64,
        reasons: String,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
