//! Model backend abstractions.
//!
//! Three roles: a causal LM that exposes token log-probabilities and
//! loss gradients, a masked LM that proposes in-context replacements,
//! and a sequence-to-sequence rewriter for the lightweight path. All
//! log-probabilities are base 2, so self-information downstream is in
//! bits.
//!
//! Backend ids select implementations:
//!
//! - `stub:<path>` / `stub:default` — hermetic table-driven backends
//!   for tests and CI (see [`stub`]).
//! - `tiny:causal` / `tiny:masked` — small neural bag-of-context
//!   models trained at first use on an embedded corpus (see [`tiny`]).
//! - `stub:echo` / `distilled:<path>` — sequence-to-sequence backends.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::Prompt;

pub mod stub;
pub mod tiny;

/// A backend tokenizer token with byte offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendToken {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
    #[serde(default)]
    pub special: bool,
}

/// Per-token log-probabilities and loss gradients for one prompt.
///
/// `logprob2[i]` is the base-2 log-probability of prompt token `i`
/// given its predecessors (the first token is conditioned on a
/// begin-of-sequence sentinel). `grads[i]` is the gradient of the
/// generation loss with respect to token `i`'s input embedding.
#[derive(Debug, Clone)]
pub struct CausalTrace {
    pub tokens: Vec<BackendToken>,
    pub logprob2: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
    pub loss: f64,
    pub temperature: f64,
}

impl CausalTrace {
    /// Check the trace contract: matching lengths, non-positive
    /// log-probabilities, and a consistent gradient dimension.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if self.logprob2.len() != n || self.grads.len() != n {
            return Err(Error::Backend(format!(
                "trace length mismatch: {} tokens, {} logprobs, {} grads",
                n,
                self.logprob2.len(),
                self.grads.len()
            )));
        }
        if let Some(lp) = self.logprob2.iter().find(|lp| **lp > 1e-9 || !lp.is_finite()) {
            return Err(Error::Backend(format!(
                "token log-probability must be finite and <= 0, got {lp}"
            )));
        }
        if let Some(first) = self.grads.first() {
            let dim = first.len();
            if self.grads.iter().any(|g| g.len() != dim) {
                return Err(Error::Backend("gradient dimensions differ across tokens".into()));
            }
        }
        Ok(())
    }
}

/// Masked-LM candidates, sorted by descending probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskCandidates {
    pub candidates: Vec<(String, f64)>,
}

impl MaskCandidates {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Backend("masked LM returned no candidates".into()));
        }
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        for (surface, p) in &self.candidates {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(Error::Backend(format!(
                    "candidate {surface:?} has probability {p} outside (0, 1]"
                )));
            }
            if *p > prev {
                return Err(Error::Backend("candidate probabilities are not non-increasing".into()));
            }
            prev = *p;
            sum += *p;
        }
        if sum > 1.0 + 1e-6 {
            return Err(Error::Backend(format!("candidate probabilities sum to {sum} > 1")));
        }
        Ok(())
    }
}

/// Causal language model with gradient access.
pub trait CausalLm: Send + Sync {
    /// Tokenize text with byte offsets; no special tokens are inserted.
    fn tokenize(&self, text: &str) -> Vec<BackendToken>;

    /// Score `target` as the continuation of the prompt, returning
    /// prompt-token log-probabilities, prompt-token loss gradients, and
    /// the total loss of generating `target`.
    fn causal_trace(&self, prompt: &Prompt, target: &str) -> Result<CausalTrace>;

    /// Base-2 token log-probabilities for a bare text (for perplexity).
    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>>;

    /// Greedy continuation of `text`, used as the loss target when a
    /// prompt carries no reference output.
    fn greedy_decode(&self, text: &str, max_tokens: usize) -> Result<String>;
}

/// Masked language model for in-context replacement candidates.
pub trait MaskedLm: Send + Sync {
    /// The literal mask marker this backend expects in input text.
    fn mask_token(&self) -> &str {
        MASK_TOKEN
    }

    /// Predict candidates for the single masked slot in `text`.
    fn mask_predict(&self, text: &str, top_k: usize) -> Result<MaskCandidates>;
}

/// Sequence-to-sequence rewriter.
pub trait Seq2Seq: Send + Sync {
    fn generate(&self, text: &str) -> Result<String>;
}

/// Mask marker used by the built-in backends.
pub const MASK_TOKEN: &str = "<MASK>";

/// Byte offset of the single mask occurrence, or a contract error when
/// there are zero or multiple masks.
pub fn find_single_mask(text: &str, mask_token: &str) -> Result<usize> {
    let mut positions = text.match_indices(mask_token).map(|(i, _)| i);
    match (positions.next(), positions.next()) {
        (Some(pos), None) => Ok(pos),
        (None, _) => Err(Error::InvalidInput(format!(
            "expected exactly one {mask_token} in masked text, found none"
        ))),
        (Some(_), Some(_)) => Err(Error::InvalidInput(format!(
            "expected exactly one {mask_token} in masked text, found several"
        ))),
    }
}

/// The three model roles bundled for one worker.
pub struct BackendSet {
    pub causal: Arc<dyn CausalLm>,
    pub masked: Arc<dyn MaskedLm>,
    pub seq2seq: Option<Arc<dyn Seq2Seq>>,
}

/// Build a causal backend from its id.
pub fn causal_backend(id: &str) -> Result<Arc<dyn CausalLm>> {
    if let Some(rest) = id.strip_prefix("stub:") {
        Ok(Arc::new(stub::StubCausal::from_source(rest)?))
    } else if id == "tiny:causal" {
        Ok(Arc::new(tiny::TinyCausalLm::shared()))
    } else {
        Err(Error::Config(format!("unknown causal backend id: {id}")))
    }
}

/// Build a masked backend from its id.
pub fn masked_backend(id: &str) -> Result<Arc<dyn MaskedLm>> {
    if let Some(rest) = id.strip_prefix("stub:") {
        Ok(Arc::new(stub::StubMasked::from_source(rest)?))
    } else if id == "tiny:masked" {
        Ok(Arc::new(tiny::TinyMaskedLm::shared()))
    } else {
        Err(Error::Config(format!("unknown masked backend id: {id}")))
    }
}

/// Build a sequence-to-sequence backend from its id.
pub fn seq2seq_backend(id: &str) -> Result<Arc<dyn Seq2Seq>> {
    if id == "stub:echo" {
        Ok(Arc::new(stub::EchoSeq2Seq))
    } else if let Some(rest) = id.strip_prefix("stub:") {
        Ok(Arc::new(stub::StubSeq2Seq::from_source(rest)?))
    } else if let Some(path) = id.strip_prefix("distilled:") {
        Ok(Arc::new(crate::distillation::DistilledSeq2Seq::load(path)?))
    } else {
        Err(Error::Config(format!("unknown seq2seq backend id: {id}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mask_detection() {
        assert_eq!(find_single_mask("a <MASK> b", MASK_TOKEN).unwrap(), 2);
        assert!(find_single_mask("a b", MASK_TOKEN).is_err());
        assert!(find_single_mask("<MASK> <MASK>", MASK_TOKEN).is_err());
    }

    #[test]
    fn trace_validation_rejects_positive_logprob() {
        let trace = CausalTrace {
            tokens: vec![BackendToken {
                surface: "x".into(),
                char_start: 0,
                char_end: 1,
                special: false,
            }],
            logprob2: vec![0.5],
            grads: vec![vec![0.0]],
            loss: 0.0,
            temperature: 1.0,
        };
        assert!(trace.validate().is_err());
    }

    #[test]
    fn candidates_validation() {
        let good = MaskCandidates {
            candidates: vec![("a".into(), 0.6), ("b".into(), 0.3)],
        };
        good.validate().unwrap();

        let unsorted = MaskCandidates {
            candidates: vec![("a".into(), 0.3), ("b".into(), 0.6)],
        };
        assert!(unsorted.validate().is_err());

        let oversum = MaskCandidates {
            candidates: vec![("a".into(), 0.9), ("b".into(), 0.9)],
        };
        assert!(oversum.validate().is_err());
    }
}
