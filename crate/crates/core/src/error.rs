use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("column {index} has norm {norm:e} below floor {floor:e}")]
    DegenerateColumn { index: usize, norm: f64, floor: f64 },

    #[error("power iteration did not converge after {iterations} iterations (estimate {estimate}, residual {residual:e})")]
    SpectralNonConvergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("gram matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("cannot draw {s_star} clusters out of {k}")]
    ActiveSetTooLarge { s_star: usize, k: usize },

    #[error("column {column} degenerate after resampling (seed {seed})")]
    ResampleFailed { column: usize, seed: u64 },

    #[error("cluster {0} received no columns")]
    EmptyCluster(usize),

    #[error("support size {requested} exceeds the {available} columns available under the support rule")]
    SupportTooLarge { requested: usize, available: usize },

    #[error("LASSO solver hit max_iter={iterations} with duality gap {gap:e}")]
    SolverMaxIter {
        iterations: usize,
        gap: f64,
        beta: Vec<f64>,
    },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
