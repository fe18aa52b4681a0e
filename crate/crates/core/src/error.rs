use thiserror::Error;

/// Failures raised by the numerical core.
///
/// Gap violations below the configured threshold are errors only where an
/// operation cannot proceed (resolvents, eigenframes); [`crate::model::gap_profile`]
/// reports them as a flag instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain of model `{model}`")]
    Domain { model: String, point: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("spectral gap {gap:.3e} below threshold {threshold:.3e} at node {node}")]
    GapViolation { node: usize, gap: f64, threshold: f64 },

    #[error("quantity requested at excluded node {node}")]
    SingularNode { node: usize },

    #[error("basis is not an orthonormal frame of the band subspace (defect {defect:.3e} at node {node})")]
    Basis { node: usize, defect: f64 },

    #[error("gauge map is not unitary (defect {defect:.3e} at node {node})")]
    NonOrthogonal { node: usize, defect: f64 },

    #[error("grid or component mismatch: {0}")]
    GridMismatch(String),

    #[error("ensemble state {index} violates the kinetic bound: {detail}")]
    Ensemble { index: usize, detail: String },

    #[error("time stepping accuracy not met: {0}")]
    Accuracy(String),

    #[error("wavefunction mass {mass:.3e} inside the excluded region exceeds {limit:.1e}")]
    Support { mass: f64, limit: f64 },

    #[error("unsupported effective Hamiltonian: {0}")]
    Order(String),

    #[error("packet support reaches the grid boundary: {0}")]
    Boundary(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed container: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
