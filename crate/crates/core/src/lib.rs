//! Context-aware prompt sanitization.
//!
//! The pipeline scores each word of a prompt on two axes — importance
//! (loss-gradient magnitude, a proxy for the word's effect on the
//! task output) and privacy (self-information under a causal LM, a
//! proxy for how much the word reveals) — then replaces the least
//! important content words with masked-LM candidates sampled from a
//! distribution that favors similar candidates for important low-risk
//! words and dissimilar ones for risky words. A lightweight
//! sequence-to-sequence anonymizer can be distilled from pipeline
//! output so low-resource users skip the scoring models entirely, and
//! an evaluation harness measures hiding rate, fluency, and name
//! selectivity on privacy-inserted fixtures.

pub mod backends;
pub mod config;
pub mod distillation;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod lexer;
pub mod pipeline;
pub mod scoring;
pub mod segmentation;
pub mod selection;
pub mod similarity;
pub mod substitution;

pub use config::{Ablation, RunConfig};
pub use error::{Error, Result};
pub use segmentation::{Prompt, TaskKind};
pub use substitution::AnonymizedPair;
