use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for corpus ingestion, set construction, testing and
/// evaluation. Line numbers are 1-based positions in the input file.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: duplicate generation index {index} for instance {instance_id:?}")]
    DuplicateGeneration {
        line: usize,
        instance_id: String,
        index: usize,
    },

    #[error(
        "line {line}: embedding dimension {found} for instance {instance_id:?} \
         does not match corpus-wide dimension {expected}"
    )]
    MixedEmbeddingDims {
        line: usize,
        instance_id: String,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: instance {instance_id:?} re-appears with a different query")]
    InconsistentQuery { line: usize, instance_id: String },

    #[error("corpus contains no instances")]
    EmptyCorpus,

    #[error("instance {instance_id:?} has {count} generation(s); at least 2 are required")]
    TooFewGenerations { instance_id: String, count: usize },

    #[error("instance {instance_id:?} has no references; rouge-l labeling needs at least one")]
    EmptyReferences { instance_id: String },

    #[error("instance {instance_id:?} generation {index} carries no label")]
    MissingLabel { instance_id: String, index: usize },

    #[error("instance {instance_id:?} generation {index} carries no embedding")]
    MissingEmbedding { instance_id: String, index: usize },

    #[error("instance {instance_id:?} generation {index} carries no mean_log_prob")]
    MissingMeanLogProb { instance_id: String, index: usize },

    #[error("instance {instance_id:?} has not been labeled yet")]
    UnlabeledBundle { instance_id: String },

    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("cannot aggregate an empty value pool")]
    EmptyAggregation,

    #[error("cannot pool hypothesis sets that disagree on {what}")]
    MixedSets { what: &'static str },

    #[error("the {side} sample set is empty")]
    EmptySide { side: &'static str },

    #[error("n_groups = {n_groups} is outside [1, {n}]")]
    InvalidGroupCount { n_groups: usize, n: usize },

    #[error("invalid group-size grid: {reason}")]
    InvalidGrid { reason: String },

    #[error("scores and labels have different lengths: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },

    #[error("labels contain a single class; the metric is not applicable")]
    SingleClassLabels,

    #[error("input is empty")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {what}: {value:?}")]
    UnknownName { what: &'static str, value: String },
}
