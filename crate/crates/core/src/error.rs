use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed model: {0}")]
    Model(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("state space of {what} has {size} entries, above the cap of {cap}")]
    SizeCap {
        what: String,
        size: u128,
        cap: u64,
    },

    #[error("model is partially specified: no PMF for exogenous `{0}`")]
    MissingPmf(String),

    #[error("invalid dataset: {0}")]
    Data(String),

    #[error("restriction violates model requirements: {0}")]
    Restriction(String),

    #[error("invalid query: {0}")]
    Query(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("constraint system is infeasible: data are incompatible with the model")]
    Incompatible,

    #[error("unsupported model class: {0}")]
    Unsupported(String),

    #[error("all {0} EM runs were flagged; no bounds available")]
    NoValidRuns(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default cap on enumerated joint state spaces and intermediate factor sizes.
pub const DEFAULT_SIZE_CAP: u64 = 1 << 24;

/// Size cap, overridable through the `EMCC_SIZE_CAP` environment variable.
pub fn size_cap() -> u64 {
    std::env::var("EMCC_SIZE_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_SIZE_CAP)
}

pub(crate) fn check_cap(what: impl Into<String>, size: u128, cap: u64) -> Result<()> {
    if size > cap as u128 {
        Err(Error::SizeCap {
            what: what.into(),
            size,
            cap,
        })
    } else {
        Ok(())
    }
}
