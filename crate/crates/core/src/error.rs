use thiserror::Error;

/// Errors raised anywhere in the trajectory / causal pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing cell for id {id} at time {time}: {column} is absent and the record is not censored")]
    MissingCell {
        id: String,
        time: i64,
        column: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("interval error: {0}")]
    Interval(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("model did not converge after {iterations} iterations: {context}")]
    Convergence {
        context: String,
        iterations: usize,
        last_iterate: Vec<f64>,
    },
    #[error("information matrix is singular: {0}")]
    SingularInformation(String),
    #[error("{groups} groups cannot be identified with {times} time points (need J < (K + 1) / 2)")]
    Identifiability { groups: usize, times: usize },
    #[error("bootstrap error: {0}")]
    Bootstrap(String),
    #[error("trajectory group {class} is empty{}", match .interval { Some(d) => format!(" in interval {d}"), None => String::new() })]
    EmptyGroup { class: usize, interval: Option<usize> },
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("fluctuation step failed at time {time}: {reason}")]
    Fluctuation { time: usize, reason: String },
    #[error("influence functions cannot be aligned: {0}")]
    MismatchedId(String),
    #[error("oracle enumeration too large: {0}")]
    OracleSize(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn convergence(context: impl Into<String>, iterations: usize, last: &[f64]) -> Self {
        Error::Convergence {
            context: context.into(),
            iterations,
            last_iterate: last.to_vec(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal diagnostics attached to fitted objects.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum Warning {
    /// Some linear predictors exceeded 30 in absolute value at convergence.
    Separation { rows: usize },
    /// A mixture component has proportion below 1/(2n).
    DegenerateGroup { group: usize, proportion: f64 },
    /// Probabilities hit the clamp boundary; (id, time index) pairs listed.
    Positivity { cells: Vec<(String, usize)> },
    /// Design columns dropped as linearly dependent.
    Aliased { columns: Vec<String> },
    /// Log-binomial fit failed and the Poisson fallback was used.
    LinkFallback { reason: String },
}
