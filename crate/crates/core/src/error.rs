use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },

    #[error("evaluation point coincides with a monopole source (distance {distance:e} m)")]
    SingularEvaluation { distance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("target point lies outside the source grid: {0}")]
    OutOfDomain(String),

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("direct summation guard exceeded: {voxels} voxels (limit {limit})")]
    TooLarge { voxels: usize, limit: usize },

    #[error("missing lower harmonic p{0}")]
    MissingHarmonic(usize),

    #[error("Krylov solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
