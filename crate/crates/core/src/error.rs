use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("score table has no entry for support point `{0}`")]
    MissingScore(String),
    #[error("duplicate point id `{0}`")]
    DuplicateId(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("eta for `{id}` is outside [0, 1]: {value}")]
    InvalidEta { id: String, value: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("score {0} is not in the effective range of the predictor")]
    NotInRange(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(f64),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("partition invariant violated: {0}")]
    Partition(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model variant mismatch: {0}")]
    ModelVariant(String),
    #[error("no convergence after {iterations} iterations (last iterate a={a}, b={b}, gradient norm {grad_norm:e})")]
    NonConvergence {
        iterations: usize,
        a: f64,
        b: f64,
        grad_norm: f64,
    },
    #[error("invalid generator spec: {0}")]
    Generator(String),
    #[error("generator exposes no eta oracle")]
    NoEtaOracle,
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
