//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "watermark capacity exceeded: {draws} draws could not bind {providers} providers \
         (length {length}, alphabet {alphabet}, min hamming {min_hamming})"
    )]
    CapacityExceeded {
        providers: usize,
        length: usize,
        alphabet: usize,
        min_hamming: usize,
        draws: usize,
    },

    #[error("unknown provider `{0}`")]
    UnknownProvider(String),

    #[error("document `{doc_id}` of provider `{provider}` already contains alphabet codepoint {code}")]
    AlphabetInInput {
        provider: String,
        doc_id: String,
        code: String,
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("input is empty")]
    EmptyInput,

    #[error("watermark run of {run} tokens cannot fit in a block of {block}")]
    RunLongerThanBlock { run: usize, block: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("prompt of {tokens} tokens exceeds the usable context of {max}")]
    PromptTooLong { tokens: usize, max: usize },

    #[error("provider `{provider}` has {available} qualifying sentences, need {needed}")]
    InsufficientData {
        provider: String,
        available: usize,
        needed: usize,
    },

    #[error("synonym attack requires a lexicon")]
    MissingLexicon,

    #[error("invalid token id {0}")]
    InvalidId(u32),

    #[error("unsupported format version {found}, expected {expected}")]
    FormatVersionMismatch { found: u32, expected: u32 },

    #[error("checkpoint payload checksum mismatch")]
    ChecksumMismatch,

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub fn format(what: impl Into<String>, detail: impl Into<String>) -> Error {
        Error::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
