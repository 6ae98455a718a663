//! Hermetic table-driven backends for tests and CI.
//!
//! A stub spec is a JSON document scripting all three model roles.
//! The causal stub has two modes:
//!
//! - `table`: per-token probabilities and gradients read straight from
//!   the spec.
//! - `bag`: an analytic differentiable scorer. Each token has an
//!   embedding and a weight; the prompt is scored as the
//!   weight-normalized mean of its token embeddings and the loss is
//!   half the squared distance to the target's mean embedding (so a
//!   zero-weight token contributes nothing). Gradients are exact, so
//!   gradient plumbing can be checked against finite differences
//!   without any ML runtime.
//!
//! Token lookups are by lowercased surface. The masked stub resolves
//! candidates by exact masked text, then by a `prev|next` neighbor key,
//! then by a default list.

use std::collections::BTreeMap;
use std::fs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexer;
use crate::segmentation::Prompt;

use super::{
    find_single_mask, BackendToken, CausalLm, CausalTrace, MaskCandidates, MaskedLm, Seq2Seq,
    MASK_TOKEN,
};

/// Default spec used by `stub:default` (hermetic CI backends).
const DEFAULT_SPEC: &str = include_str!("../../data/default_stub.json");

fn default_context_window() -> usize {
    512
}

fn default_alpha() -> f64 {
    1.0
}

fn default_decode_fallback() -> String {
    "ok".to_string()
}

fn default_true() -> bool {
    true
}

/// Scripted behavior for one token.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenEntry {
    /// Model probability of this token in context; log2(prob) is the
    /// reported log-probability.
    pub prob: f64,
    /// Fixed loss gradient (table mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad: Option<Vec<f64>>,
    /// Token embedding (bag mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    /// Per-token weight in the bag scorer.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl TokenEntry {
    pub fn with_prob(prob: f64) -> Self {
        TokenEntry {
            prob,
            grad: None,
            embedding: None,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CausalMode {
    #[default]
    Table,
    Bag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausalSpec {
    #[serde(default)]
    pub mode: CausalMode,
    #[serde(default = "default_context_window")]
    pub context_window: usize,
    #[serde(default)]
    pub tokens: BTreeMap<String, TokenEntry>,
    pub default: TokenEntry,
    /// Greedy-decode outputs keyed by exact prompt text.
    #[serde(default)]
    pub decode: BTreeMap<String, String>,
    #[serde(default = "default_decode_fallback")]
    pub default_decode: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct MaskedSpec {
    /// Candidates keyed by the exact masked text.
    #[serde(default)]
    pub texts: BTreeMap<String, Vec<(String, f64)>>,
    /// Candidates keyed by `prev|next` lowercased neighbors of the mask
    /// (`^` and `$` stand for text edges).
    #[serde(default)]
    pub slots: BTreeMap<String, Vec<(String, f64)>>,
    #[serde(default)]
    pub default: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Seq2SeqSpec {
    /// "echo" or "table".
    pub mode: String,
    #[serde(default)]
    pub map: BTreeMap<String, String>,
    #[serde(default = "default_true")]
    pub fallback_echo: bool,
}

/// A full stub script for all three backend roles.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct StubSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal: Option<CausalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked: Option<MaskedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq2seq: Option<Seq2SeqSpec>,
}

impl StubSpec {
    /// Load a spec from `default` (the embedded CI table) or a file path.
    pub fn from_source(source: &str) -> Result<StubSpec> {
        let raw = if source == "default" {
            DEFAULT_SPEC.to_string()
        } else {
            fs::read_to_string(source).map_err(|e| {
                Error::Config(format!("cannot read stub spec {source}: {e}"))
            })?
        };
        let spec: StubSpec = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("malformed stub spec {source}: {e}")))?;
        Ok(spec)
    }
}

fn tokenize_plain(text: &str) -> Vec<BackendToken> {
    lexer::lex(text)
        .into_iter()
        .map(|l| BackendToken {
            surface: l.surface,
            char_start: l.char_start,
            char_end: l.char_end,
            special: false,
        })
        .collect()
}

/// Table- or bag-mode causal stub.
pub struct StubCausal {
    spec: CausalSpec,
    temperature: f64,
}

impl StubCausal {
    pub fn from_source(source: &str) -> Result<StubCausal> {
        let spec = StubSpec::from_source(source)?;
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &StubSpec) -> Result<StubCausal> {
        let causal = spec
            .causal
            .clone()
            .ok_or_else(|| Error::Config("stub spec has no causal section".into()))?;
        if !(causal.default.prob > 0.0 && causal.default.prob <= 1.0) {
            return Err(Error::Config("stub default token prob must be in (0, 1]".into()));
        }
        Ok(StubCausal {
            spec: causal,
            temperature: spec.temperature.unwrap_or(1.0),
        })
    }

    fn entry(&self, surface: &str) -> &TokenEntry {
        self.spec
            .tokens
            .get(&surface.to_lowercase())
            .unwrap_or(&self.spec.default)
    }

    fn grad_dim(&self) -> usize {
        self.spec
            .default
            .grad
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.spec.tokens.values().find_map(|e| e.grad.as_ref().map(Vec::len)))
            .unwrap_or(1)
    }

    fn embedding_of(&self, surface: &str) -> Result<&[f64]> {
        let entry = self.entry(surface);
        entry
            .embedding
            .as_deref()
            .or(self.spec.default.embedding.as_deref())
            .ok_or_else(|| {
                Error::Config(format!("bag-mode stub has no embedding for {surface:?}"))
            })
    }

    /// Weight-normalized mean embedding of the prompt tokens, plus the
    /// total weight.
    fn bag_mean(&self, tokens: &[BackendToken]) -> Result<(Vec<f64>, f64)> {
        let dim = self.embedding_of(&tokens[0].surface)?.len();
        let mut mean = vec![0.0; dim];
        let mut total = 0.0;
        for t in tokens {
            let e = self.embedding_of(&t.surface)?;
            if e.len() != dim {
                return Err(Error::Config("stub embeddings have inconsistent dimensions".into()));
            }
            let alpha = self.entry(&t.surface).alpha;
            total += alpha;
            for (m, v) in mean.iter_mut().zip(e) {
                *m += alpha * v;
            }
        }
        if total <= 0.0 {
            return Err(Error::Config("bag-mode stub needs a positive total token weight".into()));
        }
        for m in &mut mean {
            *m /= total;
        }
        Ok((mean, total))
    }

    /// Unweighted mean embedding of the target tokens.
    fn target_vector(&self, target_tokens: &[BackendToken]) -> Result<Vec<f64>> {
        let dim = self.embedding_of(&target_tokens[0].surface)?.len();
        let mut v = vec![0.0; dim];
        for t in target_tokens {
            let e = self.embedding_of(&t.surface)?;
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi += ei;
            }
        }
        for vi in &mut v {
            *vi /= target_tokens.len() as f64;
        }
        Ok(v)
    }
}

impl CausalLm for StubCausal {
    fn tokenize(&self, text: &str) -> Vec<BackendToken> {
        tokenize_plain(text)
    }

    fn causal_trace(&self, prompt: &Prompt, target: &str) -> Result<CausalTrace> {
        let tokens = self.tokenize(&prompt.text);
        let target_tokens = self.tokenize(target);
        if target_tokens.is_empty() {
            return Err(Error::InvalidInput("loss target must be non-empty".into()));
        }
        if tokens.len() + target_tokens.len() > self.spec.context_window {
            return Err(Error::Length(format!(
                "{} tokens exceed stub context window {}",
                tokens.len() + target_tokens.len(),
                self.spec.context_window
            )));
        }

        let logprob2: Vec<f64> = tokens
            .iter()
            .map(|t| self.entry(&t.surface).prob.log2())
            .collect();

        let (loss, grads) = match self.spec.mode {
            CausalMode::Table => {
                let loss: f64 = target_tokens
                    .iter()
                    .map(|t| -self.entry(&t.surface).prob.log2())
                    .sum();
                let dim = self.grad_dim();
                let grads = tokens
                    .iter()
                    .map(|t| {
                        self.entry(&t.surface)
                            .grad
                            .clone()
                            .unwrap_or_else(|| vec![0.0; dim])
                    })
                    .collect();
                (loss, grads)
            }
            CausalMode::Bag => {
                let (mean, total_weight) = self.bag_mean(&tokens)?;
                let target_vec = self.target_vector(&target_tokens)?;
                let diff: Vec<f64> = mean.iter().zip(&target_vec).map(|(m, v)| m - v).collect();
                let loss = 0.5 * diff.iter().map(|d| d * d).sum::<f64>();
                let grads = tokens
                    .iter()
                    .map(|t| {
                        let alpha = self.entry(&t.surface).alpha;
                        diff.iter().map(|d| alpha / total_weight * d).collect()
                    })
                    .collect();
                (loss, grads)
            }
        };

        let trace = CausalTrace {
            tokens,
            logprob2,
            grads,
            loss,
            temperature: self.temperature,
        };
        trace.validate()?;
        Ok(trace)
    }

    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        let tokens = self.tokenize(text);
        if tokens.is_empty() {
            return Err(Error::InvalidInput("cannot score empty text".into()));
        }
        Ok(tokens.iter().map(|t| self.entry(&t.surface).prob.log2()).collect())
    }

    fn greedy_decode(&self, text: &str, _max_tokens: usize) -> Result<String> {
        Ok(self
            .spec
            .decode
            .get(text)
            .cloned()
            .unwrap_or_else(|| self.spec.default_decode.clone()))
    }
}

/// Scripted masked LM.
pub struct StubMasked {
    spec: MaskedSpec,
}

impl StubMasked {
    pub fn from_source(source: &str) -> Result<StubMasked> {
        let spec = StubSpec::from_source(source)?;
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &StubSpec) -> Result<StubMasked> {
        let masked = spec
            .masked
            .clone()
            .ok_or_else(|| Error::Config("stub spec has no masked section".into()))?;
        Ok(StubMasked { spec: masked })
    }

    fn slot_key(text: &str, mask_pos: usize) -> String {
        let before = &text[..mask_pos];
        let after = &text[mask_pos + MASK_TOKEN.len()..];
        let prev = lexer::lex(before)
            .last()
            .map(|l| l.surface.to_lowercase())
            .unwrap_or_else(|| "^".to_string());
        let next = lexer::lex(after)
            .first()
            .map(|l| l.surface.to_lowercase())
            .unwrap_or_else(|| "$".to_string());
        format!("{prev}|{next}")
    }
}

impl MaskedLm for StubMasked {
    fn mask_predict(&self, text: &str, top_k: usize) -> Result<MaskCandidates> {
        let mask_pos = find_single_mask(text, MASK_TOKEN)?;
        let raw = self
            .spec
            .texts
            .get(text)
            .or_else(|| self.spec.slots.get(&Self::slot_key(text, mask_pos)))
            .unwrap_or(&self.spec.default);
        if raw.is_empty() {
            return Err(Error::Backend("stub masked table has no candidates for this slot".into()));
        }
        let mut candidates = raw.clone();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
        candidates.truncate(top_k.max(1));
        let out = MaskCandidates { candidates };
        out.validate()?;
        Ok(out)
    }
}

/// Seq2seq stub that returns its input unchanged.
pub struct EchoSeq2Seq;

impl Seq2Seq for EchoSeq2Seq {
    fn generate(&self, text: &str) -> Result<String> {
        Ok(text.to_string())
    }
}

/// Seq2seq stub backed by an exact-match rewrite table.
pub struct StubSeq2Seq {
    spec: Seq2SeqSpec,
}

impl StubSeq2Seq {
    pub fn from_source(source: &str) -> Result<StubSeq2Seq> {
        let spec = StubSpec::from_source(source)?;
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &StubSpec) -> Result<StubSeq2Seq> {
        let seq2seq = spec
            .seq2seq
            .clone()
            .ok_or_else(|| Error::Config("stub spec has no seq2seq section".into()))?;
        if seq2seq.mode != "echo" && seq2seq.mode != "table" {
            return Err(Error::Config(format!("unknown seq2seq stub mode: {}", seq2seq.mode)));
        }
        Ok(StubSeq2Seq { spec: seq2seq })
    }
}

impl Seq2Seq for StubSeq2Seq {
    fn generate(&self, text: &str) -> Result<String> {
        if self.spec.mode == "echo" {
            return Ok(text.to_string());
        }
        match self.spec.map.get(text) {
            Some(out) => Ok(out.clone()),
            None if self.spec.fallback_echo => Ok(text.to_string()),
            None => Err(Error::Backend(format!("seq2seq stub has no mapping for {text:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_spec() -> StubSpec {
        let mut tokens = BTreeMap::new();
        tokens.insert(
            "jack".to_string(),
            TokenEntry {
                prob: 0.125,
                grad: Some(vec![1.0, 2.0]),
                embedding: None,
                alpha: 1.0,
            },
        );
        tokens.insert("half".to_string(), TokenEntry::with_prob(0.5));
        StubSpec {
            temperature: Some(1.0),
            causal: Some(CausalSpec {
                mode: CausalMode::Table,
                context_window: 16,
                tokens,
                default: TokenEntry {
                    prob: 0.25,
                    grad: Some(vec![0.0, 0.0]),
                    embedding: None,
                    alpha: 1.0,
                },
                decode: BTreeMap::new(),
                default_decode: "ok".into(),
            }),
            masked: Some(MaskedSpec {
                texts: BTreeMap::new(),
                slots: BTreeMap::new(),
                default: vec![("cat".into(), 0.5), ("dog".into(), 0.3)],
            }),
            seq2seq: Some(Seq2SeqSpec {
                mode: "table".into(),
                map: [("a".to_string(), "b".to_string())].into_iter().collect(),
                fallback_echo: true,
            }),
        }
    }

    #[test]
    fn table_values_come_back_exactly() {
        let backend = StubCausal::from_spec(&table_spec()).unwrap();
        let prompt = Prompt::new("p", "Jack half other");
        let trace = backend.causal_trace(&prompt, "half").unwrap();
        assert_eq!(trace.logprob2, vec![0.125f64.log2(), -1.0, -2.0]);
        assert_eq!(trace.grads[0], vec![1.0, 2.0]);
        assert_eq!(trace.grads[2], vec![0.0, 0.0]);
        assert!((trace.loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probability_half_gives_logprob_minus_one() {
        let backend = StubCausal::from_spec(&table_spec()).unwrap();
        let lps = backend.token_logprobs("half").unwrap();
        assert_eq!(lps, vec![-1.0]);
    }

    #[test]
    fn chain_rule_probability_coherence() {
        let backend = StubCausal::from_spec(&table_spec()).unwrap();
        let lps = backend.token_logprobs("Jack half other words here").unwrap();
        let product: f64 = lps.iter().map(|lp| lp.exp2()).product();
        let from_sum = lps.iter().sum::<f64>().exp2();
        assert!((product - from_sum).abs() < 1e-9);
    }

    #[test]
    fn context_window_is_enforced() {
        let backend = StubCausal::from_spec(&table_spec()).unwrap();
        let long = "word ".repeat(20);
        let prompt = Prompt::new("p", long.trim());
        assert!(matches!(
            backend.causal_trace(&prompt, "x"),
            Err(Error::Length(_))
        ));
    }

    #[test]
    fn trace_is_deterministic() {
        let backend = StubCausal::from_spec(&table_spec()).unwrap();
        let prompt = Prompt::new("p", "Jack half other");
        let a = backend.causal_trace(&prompt, "half ok").unwrap();
        let b = backend.causal_trace(&prompt, "half ok").unwrap();
        assert_eq!(a.logprob2, b.logprob2);
        assert!((a.loss - b.loss).abs() < 1e-6);
    }

    #[test]
    fn bag_mode_gradients_are_analytic() {
        let mut tokens = BTreeMap::new();
        tokens.insert(
            "a".to_string(),
            TokenEntry {
                prob: 0.5,
                grad: None,
                embedding: Some(vec![1.0, 0.0]),
                alpha: 2.0,
            },
        );
        tokens.insert(
            "b".to_string(),
            TokenEntry {
                prob: 0.5,
                grad: None,
                embedding: Some(vec![0.0, 1.0]),
                alpha: 1.0,
            },
        );
        tokens.insert(
            "t".to_string(),
            TokenEntry {
                prob: 0.5,
                grad: None,
                embedding: Some(vec![0.0, 0.0]),
                alpha: 1.0,
            },
        );
        let spec = StubSpec {
            temperature: None,
            causal: Some(CausalSpec {
                mode: CausalMode::Bag,
                context_window: 512,
                tokens,
                default: TokenEntry {
                    prob: 0.5,
                    grad: None,
                    embedding: Some(vec![0.0, 0.0]),
                    alpha: 1.0,
                },
                decode: BTreeMap::new(),
                default_decode: "ok".into(),
            }),
            masked: None,
            seq2seq: None,
        };
        let backend = StubCausal::from_spec(&spec).unwrap();
        let prompt = Prompt::new("p", "a b");
        let trace = backend.causal_trace(&prompt, "t").unwrap();
        // mean = (2*[1,0] + 1*[0,1]) / 3 = [2/3, 1/3]; target = [0,0]
        let expected_loss = 0.5 * (4.0 / 9.0 + 1.0 / 9.0);
        assert!((trace.loss - expected_loss).abs() < 1e-12);
        // grad for "a" = alpha/total * diff = 2/3 * [2/3, 1/3]
        assert!((trace.grads[0][0] - 4.0 / 9.0).abs() < 1e-12);
        assert!((trace.grads[0][1] - 2.0 / 9.0).abs() < 1e-12);
        // grad for "b" = 1/3 * [2/3, 1/3]
        assert!((trace.grads[1][0] - 2.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn masked_stub_keys_and_contract() {
        let backend = StubMasked::from_spec(&table_spec()).unwrap();
        let preds = backend.mask_predict("the <MASK> sat", 10).unwrap();
        assert_eq!(preds.candidates[0].0, "cat");
        assert!(backend.mask_predict("no mask here", 10).is_err());
        assert!(backend.mask_predict("<MASK> and <MASK>", 10).is_err());
    }

    #[test]
    fn seq2seq_stubs() {
        let echo = EchoSeq2Seq;
        assert_eq!(echo.generate("hello").unwrap(), "hello");
        let table = StubSeq2Seq::from_spec(&table_spec()).unwrap();
        assert_eq!(table.generate("a").unwrap(), "b");
        assert_eq!(table.generate("zzz").unwrap(), "zzz");
    }

    #[test]
    fn default_spec_parses() {
        let spec = StubSpec::from_source("default").unwrap();
        assert!(spec.causal.is_some());
        assert!(spec.masked.is_some());
        assert!(spec.seq2seq.is_some());
    }
}
