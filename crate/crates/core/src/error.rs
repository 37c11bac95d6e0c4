use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular deformation gradient")]
    SingularDeformation,

    #[error("invalid Ogden state: 2E + I is not positive definite")]
    InvalidOgdenState,

    #[error("non-injective deformation: det(I + grad u) = {det} at the Neumann boundary")]
    NonInjective { det: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("singular bordered system (Schur complement {schur:e})")]
    SingularBorderedSystem { schur: f64 },

    #[error("singular linear system at row {row}")]
    SingularSystem { row: usize },

    #[error("Newton did not converge at step {step} after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { step: usize, iterations: usize, residual: f64 },

    #[error("warp parameter out of range: {0}")]
    Warp(String),

    #[error("optimizer aborted: {0}")]
    OptimizerAborted(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { key: key.into(), message: message.into() }
    }
}
