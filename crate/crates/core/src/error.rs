use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty basket at line {line}")]
    EmptyBasket { line: usize },

    #[error("malformed basket at line {line}: {reason}")]
    MalformedBasket { line: usize, reason: String },

    #[error("catalog row {row}: {reason}")]
    Catalog { row: usize, reason: String },

    #[error("catalog header must be `t,lat,lon` or `t,lat,lon,mag`, found `{0}`")]
    CatalogHeader(String),

    #[error("invalid item `{0}`: items must be non-empty and contain no whitespace")]
    InvalidItem(String),

    #[error("invalid timestamp `{0}`")]
    InvalidTimestamp(String),

    #[error("co-occurrence of an item with itself is undefined (`{0}`)")]
    SelfCooccurrence(String),

    #[error("undefined entropy: distribution has no mass")]
    UndefinedEntropy,

    #[error("vocabulary mismatch between market vectors")]
    VocabularyMismatch,

    #[error("stream span {span} is shorter than 2 * delta_t = {required}")]
    SpanTooShort { span: i64, required: i64 },

    #[error("change point at t={0} does not lie on a segment boundary")]
    NotOnBoundary(i64),

    #[error("series has {len} usable readings, need at least {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
