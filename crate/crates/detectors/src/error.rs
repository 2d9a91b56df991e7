use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("feature schema mismatch: classifier expects {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },

    #[error("training set has an empty class: {0}")]
    EmptyClass(&'static str),

    #[error("non-finite feature value in sample {sample}")]
    NonFinite { sample: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cluster count {k} exceeds vocabulary size {vocab}")]
    TooManyClusters { k: usize, vocab: usize },

    #[error("gcn: {0}")]
    Gcn(#[from] substitute::GcnError),

    #[error("model file {path}: {reason}")]
    ModelFile { path: String, reason: String },

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
}
