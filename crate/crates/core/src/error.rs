use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} out of range for graph with {count} nodes")]
    NodeOutOfRange { node: usize, count: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("edge set contains a directed cycle")]
    Cycle,

    #[error("invalid statement: {0}")]
    InvalidStatement(String),

    #[error("enumeration too large: {what} ({size} > {limit})")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error(
        "sample index {sample} out of range: environment {env} has only {available} samples"
    )]
    SampleOutOfRange {
        env: usize,
        sample: usize,
        available: usize,
    },

    #[error(
        "discovery requires at least 2 samples in every environment; environment {env} has {samples}"
    )]
    TooFewSamples { env: usize, samples: usize },

    #[error("no sink found among remaining variables {remaining:?}")]
    NoSinkFound {
        remaining: Vec<usize>,
        /// `p_values[a][b]`: p-value of the sink test of `remaining[a]` against `remaining[b]`.
        p_values: Vec<Vec<f64>>,
    },

    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
