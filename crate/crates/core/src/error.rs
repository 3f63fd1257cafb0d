use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid step law: {0}")]
    InvalidLaw(String),

    #[error("window too small: leaked mass {leak:e} exceeds bound {bound:e}")]
    WindowTooSmall { leak: f64, bound: f64 },

    #[error("enumeration too large: {paths} paths exceed the limit {limit}")]
    TooLarge { paths: f64, limit: f64 },

    #[error("tilt target unreachable within radius {kappa}: {detail}")]
    TargetUnreachable { kappa: f64, detail: String },

    #[error("exact rational weights requested but law `{0}` has no exact representation")]
    NoExactWeights(String),

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("insufficient hits: {0}")]
    InsufficientHits(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("unknown law `{0}`")]
    UnknownLaw(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
