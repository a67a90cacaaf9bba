use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("election has no ballots")]
    EmptyElection,

    #[error("{relevant} relevant candidates exceed the search cap of {cap}; {}", threshold_note(.threshold))]
    SearchTooLarge { relevant: usize, cap: usize, threshold: Option<f64> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::InvalidInstance(_) => "invalid-instance",
            Error::Domain(_) => "domain",
            Error::EmptyElection => "empty-election",
            Error::SearchTooLarge { .. } => "search-too-large",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

fn threshold_note(threshold: &Option<f64>) -> String {
    match threshold {
        Some(t) => format!("the traceability threshold for this cap is {t:.2}%"),
        None => "no allowance reduces the election to the cap".into(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
