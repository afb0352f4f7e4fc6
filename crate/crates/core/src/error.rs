use thiserror::Error;

/// Errors surfaced by the models, the filter and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the model's domain: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    /// Every particle received zero measurement weight.
    #[error("track lost: all measurement messages vanished")]
    TrackLost,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config serialization error: {0}")]
    ConfigWrite(#[from] toml::ser::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("scan file error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
