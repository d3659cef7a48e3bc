use std::path::PathBuf;
use thiserror::Error;

/// Invalid configuration, scenario or geometry.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Trial placement could not satisfy its separation constraints.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("trial setup failed: {0}")]
pub struct SetupError(pub String);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitnessError {
    #[error("{task} fitness needs at least {needed} robots, got {got}")]
    TooFewRobots {
        task: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("empty trajectory trace")]
    EmptyTrace,
    #[error("trace has no geo-fence to monitor")]
    MissingFence,
    #[error("trace has no waypoint")]
    MissingWaypoint,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenomeParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("genome is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrigingError {
    #[error("variogram fit needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate sample geometry: {0}")]
    Degenerate(String),
    #[error("invalid variogram: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("window of {window} s is longer than the {available} s recorded")]
    WindowTooLong { window: f64, available: f64 },
    #[error("series has no column named {0:?}")]
    MissingColumn(String),
}

/// Top-level error for file-driven operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error(transparent)]
    Genome(#[from] GenomeParseError),
    #[error(transparent)]
    Kriging(#[from] KrigingError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("genome has {inputs} inputs and {outputs} outputs, expected 11 and 2")]
    Arity { inputs: usize, outputs: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
