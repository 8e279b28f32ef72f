use thiserror::Error;

/// Errors raised by the library. Variants are grouped roughly by module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frame undefined at the spatial origin (r = 0)")]
    PoleDegenerate,
    #[error("t = 0: the boost form of the restricted derivative is undefined")]
    TimeZero,
    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },
    #[error("derivative of a weight requested at the kink q = 0")]
    KinkPoint,
    #[error("ghost layers are stale; fill them before differentiating")]
    GhostInvalid,
    #[error("integration region is empty")]
    EmptyRegion,
    #[error("cone q = q0 does not meet the grid in the requested time window")]
    EmptyCone,
    #[error("fields live on different domains: {0}")]
    DomainMismatch(String),
    #[error("no stored snapshot history covering [{t1}, {t2}]")]
    HistoryMissing { t1: f64, t2: f64 },
    #[error("Lie derivative of the inverse metric is not proportional to it: {0}")]
    NotProportional(String),
    #[error("frame vector {0} is not admissible for the chosen frame set")]
    FrameMismatch(String),
    #[error("CFL number {cfl:.4} exceeds the limit {limit}")]
    CflViolation { cfl: f64, limit: f64 },
    #[error("vector field is not in the span of the generators")]
    NotInSpan,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
