//! Error types shared across the library.

use thiserror::Error;

/// Bad parameters, names or incompatible combinations supplied by the caller.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown function set `{0}` (expected `boolean` or `regression`)")]
    UnknownFunctionSet(String),
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("unknown reorder strategy `{0}` (expected none|original|equidistant|uniform|negbias|leftskew)")]
    UnknownStrategy(String),
    #[error("p_reorder must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("strategy `{0}` has no p_reorder hyperparameter (got {1}, only 1.0 is allowed)")]
    ProbabilityNotApplicable(String, f64),
    #[error("invalid graph parameters: {0}")]
    InvalidParams(String),
    #[error("genome has {genome} {what} but the benchmark expects {bench}")]
    ArityMismatch {
        what: &'static str,
        genome: usize,
        bench: usize,
    },
    #[error("genome uses the {genome} function set but the benchmark needs {bench}")]
    FunctionSetMismatch { genome: String, bench: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid evolution config: {0}")]
    InvalidEvolution(String),
}

/// An internal invariant was broken; always indicates a bug in an operator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error("active node at position {position} holds a forward connection to {target}")]
    ActiveForwardConnection { position: usize, target: usize },
    #[error("reorder changed the parent's fitness from {before} to {after}")]
    PhenotypeChanged { before: f64, after: f64 },
    #[error("genome failed validation: {0}")]
    InvalidGenome(String),
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no results to aggregate")]
    Empty,
    #[error("results mix graph sizes: {0} and {1} computational nodes")]
    MixedNodeCounts(usize, usize),
}

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Malformed(String),
}
