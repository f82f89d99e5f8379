use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("wave speed lambda[{index}] is zero; the boundary would be characteristic")]
    NonCharacteristicViolation { index: usize },
    #[error("wave speeds must list all positive entries before all negative ones")]
    OrderingError,
    #[error("relaxation speed a[{index}] = {value} is not positive")]
    InvalidRelaxationSpeed { index: usize, value: f64 },
    #[error("eigenbasis is singular or ill-conditioned (condition number {cond:e})")]
    SingularEigenbasis { cond: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid given boundary condition: {0}")]
    InvalidGivenBC(String),
    #[error("degenerate construction: {0}")]
    DegenerateConstruction(String),
    #[error("invalid layer datum: {0}")]
    InvalidLayerDatum(String),
    #[error("stable/unstable root split failed at eta = {eta}, xi0 = {xi0_re}+{xi0_im}i")]
    EigenSplitFailure { eta: f64, xi0_re: f64, xi0_im: f64 },
    #[error("reduction failure: {0}")]
    ReductionFailure(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("numerics error: {0}")]
    NumericsError(String),
    #[error("symmetrizer needs the strict sub-characteristic condition")]
    SymmetrizerUnavailable,
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("boundary solve failed: {0}")]
    BoundarySolveFailure(String),
    #[error("boundary condition is not certified (verdict {verdict}, c_hat = {c_hat:e})")]
    NotCertified { verdict: String, c_hat: f64 },
    #[error("no row of the study passed the refinement check")]
    InconclusiveStudy,
    #[error("matrix is singular or ill-conditioned (condition number {cond:e})")]
    IllConditioned { cond: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
