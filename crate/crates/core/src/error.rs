//! Error type shared across the crate.

/// All failure modes of the engine and toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor/parameter dimensions do not line up; `axis` names the
    /// offending axis.
    #[error("shape mismatch on {axis}: expected {expected}, got {got}")]
    Shape {
        axis: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("input too short: got {got} samples, need at least {need}")]
    InputTooShort { got: usize, need: usize },

    #[error("unsupported audio format: {0}")]
    Audio(String),

    #[error("not a checkpoint file (bad magic)")]
    CkptMagic,

    #[error("unsupported checkpoint version {0}")]
    CkptVersion(u32),

    /// Structural damage: truncation, out-of-bounds offsets, overlap,
    /// misalignment.
    #[error("corrupt checkpoint: {0}")]
    CkptCorrupt(String),

    /// Tensor name set / shapes / element count disagree with the config
    /// stored in the file.
    #[error("checkpoint does not match its config: {0}")]
    CkptSchema(String),

    #[error("degenerate embedding: zero norm")]
    ZeroNormEmbedding,

    #[error("degenerate cohort: zero score variance on {side} side")]
    DegenerateCohort { side: &'static str },

    #[error("insufficient cohort: got {got} scores, need at least {need}")]
    InsufficientCohort { got: usize, need: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("non-finite values produced by {0}")]
    NonFinite(&'static str),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
