use std::path::PathBuf;

/// Errors produced by the `opfr` library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },

    #[error("line {line}: expected {expected} fields, found {found}")]
    RowArity {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: cannot parse {token:?} as a number")]
    InvalidNumber { line: usize, token: String },

    #[error("line {line}: non-finite feature value {token:?}")]
    NonFinite { line: usize, token: String },

    #[error("line {line}: label {label} out of range for {n_classes} classes")]
    LabelOutOfRange {
        line: usize,
        label: u64,
        n_classes: u32,
    },

    #[error("line {line}: class {class} declared in the header has no samples")]
    MissingClass { line: usize, class: u32 },

    #[error("line {line}: duplicate sample id {id}")]
    DuplicateId { line: usize, id: u64 },

    #[error("line {line}: header declares {declared} samples, found {found}")]
    SampleCount {
        line: usize,
        declared: usize,
        found: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dataset has no samples")]
    EmptyDataset,

    #[error("train fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),

    #[error("split infeasible: {train} training samples cannot cover {classes} classes")]
    InfeasibleSplit { train: usize, classes: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown metric {0:?} (expected euclidean, manhattan or sqeuclidean)")]
    UnknownMetric(String),

    #[error("training needs at least 2 samples, found {0}")]
    TooFewSamples(usize),

    #[error("training set contains a single class")]
    SingleClassTraining,

    #[error("degenerate density: every k-nn arc has length zero")]
    DegenerateDensity,

    #[error("operation needs a {expected} forest, got {found}")]
    WrongVariant {
        expected: &'static str,
        found: &'static str,
    },

    #[error("top-r must be at least 1")]
    InvalidTopR,

    #[error("candidate id {0} is not in the training set")]
    UnknownCandidate(u64),

    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("cannot average an empty list")]
    EmptyInput,

    #[error("signed-rank test not applicable: every paired difference is zero")]
    NotApplicable,

    #[error("unsupported model format {0:?}")]
    VersionMismatch(String),

    #[error("line {line}: corrupt model: {reason}")]
    CorruptModel { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
