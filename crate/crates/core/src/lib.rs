//! Source attribution for language-model output via invisible text watermarks.
//!
//! The pipeline: assign each data provider a unique watermark over an
//! invisible Unicode alphabet ([`registry`]), embed the watermarks into the
//! most representative sentences of each provider's corpus ([`marking`]),
//! train a small decoder-only model whose next-token prediction is routed to
//! separate word and watermark heads ([`model`], [`trainer`]), generate text
//! that carries watermarks ([`generator`]), and attribute generated text back
//! to its source provider, including under adversarial edits ([`attacks`],
//! [`eval`]). [`bm25`] provides a retrieval baseline for comparison and
//! [`synthbench`] generates deterministic synthetic corpora for end-to-end
//! experiments.

pub mod attacks;
pub mod bm25;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod generator;
pub mod marking;
pub mod model;
pub mod registry;
pub mod seed;
pub mod synthbench;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};
pub use registry::{MatchMode, MatchResult, ProviderId, Registry, Watermark, WatermarkAlphabet};
pub use tokenizer::{Block, TokenKind, TokenStream, Vocab};
