use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight overflow: log weight {0} exceeds the representable range")]
    WeightOverflow(f64),
    #[error("series not converged after {0} terms")]
    SeriesNotConverged(usize),
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid mismatch")]
    GridMismatch,
    #[error("dilation off grid: leaked fraction {0:e}")]
    DilationOffGrid(f64),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("P_{0} is infinite")]
    PInfinite(usize),
    #[error("negative rho {rho} at t = {t}")]
    NegativeRho { t: f64, rho: f64 },
    #[error("schedule infeasible: {0}")]
    ScheduleInfeasible(String),
    #[error("tail fit failure: relative residual {0:e}")]
    TailFitFailure(f64),
    #[error("tail diverges: integrand exponent {0} >= -1")]
    TailDiverges(f64),
    #[error("step failure at t = {t}: step {h:e} below minimum")]
    StepFailure { t: f64, h: f64 },
    #[error("norm blowup at t = {t} (rho = {rho}): {norm:e}")]
    NormBlowup { t: f64, rho: f64, norm: f64 },
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("ladder not converged: {0}")]
    LadderNotConverged(String),
    #[error("config invalid: {0}")]
    ConfigInvalid(String),
    #[error("suite failed: {0}")]
    SuiteFailed(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
