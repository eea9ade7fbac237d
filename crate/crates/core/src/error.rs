use thiserror::Error;

use crate::explorer::FeasibilityResult;
use crate::linalg::ComplexMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("dynamics are not strictly stable (max Re eigenvalue {max_real:.6e}, margin {margin:.1e})")]
    Unstable { max_real: f64, margin: f64 },

    #[error("eigenvalue iteration failed to converge on {matrix:?}")]
    NumericFailure { matrix: Box<ComplexMatrix> },

    #[error("pole in closed-form resolvent (|denominator| = {0:.3e})")]
    Pole(f64),

    #[error("no PSD completion found with alpha <= {alpha_max:e}")]
    ConstructionInfeasible { alpha_max: f64 },

    #[error("total photon number is zero; both drives are off")]
    ZeroPhotons,

    #[error("rotating-wave approximation invalid: drive gap ratio {ratio:.3e} <= threshold {threshold}")]
    RwaInvalid { ratio: f64, threshold: f64 },

    #[error("time step {dt:e} too coarse; must not exceed {limit:e}")]
    StepTooCoarse { dt: f64, limit: f64 },

    #[error("invalid trajectory configuration: {0}")]
    InvalidTrajectoryConfig(String),

    #[error("mean dynamics did not settle (transient grew from {early:.3e} to {late:.3e})")]
    NonDecayingTransient { early: f64, late: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("evaluation budget of {budget} exhausted before the search grid completed")]
    PartialResult {
        budget: usize,
        partial: Box<FeasibilityResult>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }
}
