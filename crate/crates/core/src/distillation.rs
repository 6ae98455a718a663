//! Lightweight anonymizer distillation.
//!
//! The full pipeline generates <original, anonymized> pairs; a small
//! word-level transducer is then trained on them so low-resource users
//! can anonymize without any scoring backends. The transducer is a
//! logistic replace/copy classifier over word shape, frequency, and
//! replacement-history features, plus a learned substitution table
//! with per-shape fallbacks for unseen words. Decoding is greedy and
//! deterministic.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::Seq2Seq;
use crate::config::{derive_seed, RunConfig};
use crate::error::{Error, Result};
use crate::lexer;
use crate::pipeline::sanitize_all;
use crate::segmentation::{tagger, PosTag, Prompt};
use crate::substitution::{apply_casing, AnonymizedPair};

/// Train/validation split tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// One training pair projected from an [`AnonymizedPair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPair {
    pub prompt_id: String,
    pub source: String,
    pub target: String,
    pub split: Split,
}

/// The generated pair corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorpus {
    pub pairs: Vec<CorpusPair>,
    pub generation_config_hash: String,
}

/// Per-prompt failure statistics from corpus generation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GenerationReport {
    pub generated: usize,
    pub failed: usize,
    pub failures: Vec<(String, String)>,
}

const VAL_FRACTION_DIVISOR: u64 = 20; // 5% by id hash
const MAX_FAILURE_RATE: f64 = 0.05;
const SPLIT_SALT: u64 = 0x5117_5a17;
const ANONYMIZER_CONTEXT_WINDOW: usize = 4096;

fn split_for(prompt_id: &str) -> Split {
    if derive_seed(SPLIT_SALT, prompt_id) % VAL_FRACTION_DIVISOR == 0 {
        Split::Val
    } else {
        Split::Train
    }
}

/// Run the full pipeline over a dataset and project the results into a
/// pair corpus plus its audit sidecar. Individual prompt failures are
/// skipped and reported; a failure rate above 5% aborts since it
/// signals backend misconfiguration.
pub fn generate_pairs(
    prompts: &[Prompt],
    cfg: &RunConfig,
) -> Result<(PairCorpus, Vec<AnonymizedPair>, GenerationReport)> {
    let mut seen = std::collections::HashSet::new();
    for p in prompts {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Data(format!("duplicate prompt id: {}", p.id)));
        }
    }

    let results = sanitize_all(prompts, cfg)?;
    let mut report = GenerationReport::default();
    let mut pairs = Vec::new();
    let mut sidecar = Vec::new();
    for (prompt, result) in prompts.iter().zip(results) {
        match result {
            Ok(pair) => {
                report.generated += 1;
                pairs.push(CorpusPair {
                    prompt_id: prompt.id.clone(),
                    source: pair.original_text.clone(),
                    target: pair.anonymized_text.clone(),
                    split: split_for(&prompt.id),
                });
                sidecar.push(pair);
            }
            Err(e) => {
                report.failed += 1;
                report.failures.push((prompt.id.clone(), e.to_string()));
            }
        }
    }

    let total = report.generated + report.failed;
    if total > 0 {
        let rate = report.failed as f64 / total as f64;
        if rate > MAX_FAILURE_RATE {
            return Err(Error::Data(format!(
                "{} of {} prompts failed ({:.1}%), aborting; first failure: {}",
                report.failed,
                total,
                rate * 100.0,
                report
                    .failures
                    .first()
                    .map(|(id, e)| format!("{id}: {e}"))
                    .unwrap_or_default()
            )));
        }
    }

    Ok((
        PairCorpus {
            pairs,
            generation_config_hash: cfg.hash(),
        },
        sidecar,
        report,
    ))
}

fn default_learning_rate() -> f64 {
    1e-4
}
fn default_weight_decay() -> f64 {
    1e-2
}
fn default_epochs() -> usize {
    3
}
fn default_batch_size() -> usize {
    16
}
fn default_base_model() -> String {
    "wordsub-logistic-v1".to_string()
}

/// Fine-tuning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_base_model")]
    pub base_model: String,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are total")
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One training-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: u64,
    pub loss: f64,
    pub split: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

const FEATURE_NAMES: [&str; 8] = [
    "bias",
    "capitalized_mid_sentence",
    "capitalized",
    "has_digit",
    "log_frequency",
    "long_word",
    "function_word",
    "seen_replaced",
];
const NUM_FEATURES: usize = FEATURE_NAMES.len();

/// Saved transducer: classifier weights plus substitution tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizerArtifact {
    pub base_model: String,
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    /// Lowercased source word -> (replacement, count) observations.
    pub substitutions: BTreeMap<String, Vec<(String, u32)>>,
    /// Most common replacement for capitalized / digit-bearing / other
    /// unseen words, learned from the corpus.
    pub fallback_capitalized: Option<String>,
    pub fallback_digit: Option<String>,
    pub fallback_other: Option<String>,
    /// Lowercased source-side word frequencies from the training split.
    pub frequencies: BTreeMap<String, u32>,
    pub train_config: DistillConfig,
    pub corpus_hash: String,
}

struct Example {
    features: [f64; NUM_FEATURES],
    label: f64,
}

fn is_function_word(surface: &str, sentence_initial: bool) -> bool {
    !matches!(
        tagger::tag(surface, sentence_initial),
        PosTag::Noun | PosTag::Propn | PosTag::Num | PosTag::Adj
    )
}

fn word_features(
    surface: &str,
    sentence_initial: bool,
    frequencies: &BTreeMap<String, u32>,
    substitutions: &BTreeMap<String, Vec<(String, u32)>>,
) -> [f64; NUM_FEATURES] {
    let lower = surface.to_lowercase();
    let capitalized = surface.chars().next().is_some_and(char::is_uppercase);
    let freq = frequencies.get(&lower).copied().unwrap_or(0);
    [
        1.0,
        f64::from(capitalized && !sentence_initial),
        f64::from(capitalized),
        f64::from(surface.chars().any(|c| c.is_ascii_digit())),
        (1.0 + freq as f64).ln() / 10.0,
        f64::from(surface.chars().count() >= 7),
        f64::from(is_function_word(surface, sentence_initial)),
        f64::from(substitutions.contains_key(&lower)),
    ]
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn predict(weights: &[f64], features: &[f64; NUM_FEATURES]) -> f64 {
    sigmoid(weights.iter().zip(features).map(|(w, f)| w * f).sum())
}

fn bce(p: f64, label: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Word-aligned positions of a pair; `None` when the texts do not
/// align word-for-word.
fn aligned_words(pair: &CorpusPair) -> Option<Vec<(String, String, bool)>> {
    let src = lexer::lex(&pair.source);
    let dst = lexer::lex(&pair.target);
    if src.len() != dst.len() {
        return None;
    }
    let mut sentence_initial = true;
    let mut out = Vec::with_capacity(src.len());
    for (s, d) in src.iter().zip(&dst) {
        out.push((s.surface.clone(), d.surface.clone(), sentence_initial));
        sentence_initial = matches!(s.surface.as_str(), "." | "!" | "?");
    }
    Some(out)
}

/// Training products: the artifact plus the step-by-step log.
pub struct TrainOutcome {
    pub artifact: AnonymizerArtifact,
    pub log: Vec<TrainLogEntry>,
}

/// Fit the transducer on a pair corpus.
///
/// The log records one entry per optimizer step plus a validation
/// entry at step 0 and after each epoch. Validation loss at the end is
/// expected to be at most the step-0 value on any usable corpus; a
/// non-decreasing first epoch only logs a warning.
pub fn train_anonymizer(corpus: &PairCorpus, cfg: &DistillConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.pairs.is_empty() {
        return Err(Error::InvalidInput("cannot train on a zero-pair corpus".into()));
    }

    let mut frequencies: BTreeMap<String, u32> = BTreeMap::new();
    let mut substitutions: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
    let mut train_words: Vec<(String, String, bool)> = Vec::new();
    let mut val_words: Vec<(String, String, bool)> = Vec::new();
    let mut misaligned = 0usize;

    for pair in &corpus.pairs {
        let Some(words) = aligned_words(pair) else {
            misaligned += 1;
            continue;
        };
        match pair.split {
            Split::Train => {
                for (src, dst, init) in &words {
                    let src_lower = src.to_lowercase();
                    *frequencies.entry(src_lower.clone()).or_insert(0) += 1;
                    if src_lower != dst.to_lowercase() {
                        *substitutions
                            .entry(src_lower)
                            .or_default()
                            .entry(dst.to_lowercase())
                            .or_insert(0) += 1;
                    }
                    train_words.push((src.clone(), dst.clone(), *init));
                }
            }
            Split::Val => val_words.extend(words),
        }
    }
    if train_words.is_empty() {
        return Err(Error::InvalidInput(format!(
            "corpus has no word-aligned training pairs ({misaligned} misaligned)"
        )));
    }

    let substitutions: BTreeMap<String, Vec<(String, u32)>> = substitutions
        .into_iter()
        .map(|(src, counts)| {
            let mut v: Vec<(String, u32)> = counts.into_iter().collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            (src, v)
        })
        .collect();

    let class_fallback = |filter: &dyn Fn(&str) -> bool| -> Option<String> {
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for (src, repls) in &substitutions {
            if filter(src) {
                for (dst, c) in repls {
                    *counts.entry(dst).or_insert(0) += c;
                }
            }
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(dst, _)| dst.to_string())
    };
    // Source keys are lowercased, so shape classes come from the
    // training examples instead.
    let mut cap_counts: BTreeMap<String, u32> = BTreeMap::new();
    for (src, dst, init) in &train_words {
        let capitalized = src.chars().next().is_some_and(char::is_uppercase) && !*init;
        if capitalized && src.to_lowercase() != dst.to_lowercase() {
            *cap_counts.entry(dst.to_lowercase()).or_insert(0) += 1;
        }
    }
    let fallback_capitalized = cap_counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(dst, _)| dst.clone());
    let fallback_digit = class_fallback(&|s| s.chars().any(|c| c.is_ascii_digit()));
    let fallback_other = class_fallback(&|_| true);

    let mut examples: Vec<Example> = train_words
        .iter()
        .map(|(src, dst, init)| Example {
            features: word_features(src, *init, &frequencies, &substitutions),
            label: f64::from(src.to_lowercase() != dst.to_lowercase()),
        })
        .collect();
    let val_examples: Vec<Example> = if val_words.is_empty() {
        // No validation pairs: evaluate on the training words.
        train_words
            .iter()
            .map(|(src, dst, init)| Example {
                features: word_features(src, *init, &frequencies, &substitutions),
                label: f64::from(src.to_lowercase() != dst.to_lowercase()),
            })
            .collect()
    } else {
        val_words
            .iter()
            .map(|(src, dst, init)| Example {
                features: word_features(src, *init, &frequencies, &substitutions),
                label: f64::from(src.to_lowercase() != dst.to_lowercase()),
            })
            .collect()
    };

    let mut weights = vec![0.0; NUM_FEATURES];
    let mut log = Vec::new();
    let mut step = 0u64;
    let val_loss = |weights: &[f64]| -> f64 {
        val_examples
            .iter()
            .map(|e| bce(predict(weights, &e.features), e.label))
            .sum::<f64>()
            / val_examples.len() as f64
    };
    log.push(TrainLogEntry {
        step,
        loss: val_loss(&weights),
        split: "val".into(),
        warning: None,
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut first_epoch_losses: Vec<f64> = Vec::new();
    for epoch in 0..cfg.epochs {
        for i in (1..examples.len()).rev() {
            let j = rng.gen_range(0..=i);
            examples.swap(i, j);
        }
        for batch in examples.chunks(cfg.batch_size) {
            let mut grad = [0.0; NUM_FEATURES];
            let mut batch_loss = 0.0;
            for ex in batch {
                let p = predict(&weights, &ex.features);
                batch_loss += bce(p, ex.label);
                let err = p - ex.label;
                for (g, f) in grad.iter_mut().zip(&ex.features) {
                    *g += err * f;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * (g * scale + cfg.weight_decay * *w);
            }
            step += 1;
            let loss = batch_loss * scale;
            if epoch == 0 {
                first_epoch_losses.push(loss);
            }
            log.push(TrainLogEntry {
                step,
                loss,
                split: "train".into(),
                warning: None,
            });
        }
        let mut entry = TrainLogEntry {
            step,
            loss: val_loss(&weights),
            split: "val".into(),
            warning: None,
        };
        if epoch == 0 {
            let first = first_epoch_losses.first().copied().unwrap_or(0.0);
            let last = first_epoch_losses.last().copied().unwrap_or(0.0);
            if last >= first {
                entry.warning =
                    Some("training loss did not decrease over the first epoch".into());
            }
        }
        log.push(entry);
    }

    Ok(TrainOutcome {
        artifact: AnonymizerArtifact {
            base_model: cfg.base_model.clone(),
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            weights,
            substitutions,
            fallback_capitalized,
            fallback_digit,
            fallback_other,
            frequencies,
            train_config: cfg.clone(),
            corpus_hash: corpus.generation_config_hash.clone(),
        },
        log,
    })
}

impl AnonymizerArtifact {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AnonymizerArtifact> {
        let path = resolve_artifact_path(path.as_ref());
        let raw = fs::read_to_string(&path).map_err(|e| {
            Error::Config(format!("cannot read model artifact {}: {e}", path.display()))
        })?;
        let artifact = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("malformed model artifact {}: {e}", path.display())))?;
        Ok(artifact)
    }

    fn replacement_for(&self, surface: &str) -> Option<String> {
        let lower = surface.to_lowercase();
        if let Some(repls) = self.substitutions.get(&lower) {
            return repls.first().map(|(dst, _)| dst.clone());
        }
        if surface.chars().next().is_some_and(char::is_uppercase) {
            if let Some(f) = &self.fallback_capitalized {
                return Some(f.clone());
            }
        }
        if surface.chars().any(|c| c.is_ascii_digit()) {
            if let Some(f) = &self.fallback_digit {
                return Some(f.clone());
            }
        }
        self.fallback_other.clone()
    }

    /// Single greedy forward pass: replace words the classifier flags,
    /// copy the rest.
    pub fn anonymize(&self, text: &str) -> Result<String> {
        if text.is_empty() {
            return Err(Error::InvalidInput("cannot anonymize empty text".into()));
        }
        let words = lexer::lex(text);
        if words.len() > ANONYMIZER_CONTEXT_WINDOW {
            return Err(Error::Length(format!(
                "{} words exceed the anonymizer context window of {ANONYMIZER_CONTEXT_WINDOW}",
                words.len()
            )));
        }
        let mut out = String::with_capacity(text.len());
        let mut cursor = 0;
        let mut sentence_initial = true;
        for w in &words {
            out.push_str(&text[cursor..w.char_start]);
            let features =
                word_features(&w.surface, sentence_initial, &self.frequencies, &self.substitutions);
            let p = predict(&self.weights, &features);
            let replaced = if p >= 0.5 {
                self.replacement_for(&w.surface)
                    .filter(|r| r.to_lowercase() != w.surface.to_lowercase())
            } else {
                None
            };
            match replaced {
                Some(r) => out.push_str(&apply_casing(&w.surface, &r)),
                None => out.push_str(&w.surface),
            }
            cursor = w.char_end;
            sentence_initial = matches!(w.surface.as_str(), "." | "!" | "?");
        }
        out.push_str(&text[cursor..]);
        Ok(out)
    }
}

fn resolve_artifact_path(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    if let Ok(cache) = std::env::var("PROMPTMASK_CACHE_DIR") {
        let candidate = Path::new(&cache).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}

/// Anonymize with a trained artifact only; no scoring backends exist
/// on this path.
pub fn anonymize_lightweight(text: &str, artifact: &AnonymizerArtifact) -> Result<String> {
    artifact.anonymize(text)
}

/// Seq2seq backend wrapping a saved artifact (`distilled:<path>`).
pub struct DistilledSeq2Seq {
    artifact: AnonymizerArtifact,
}

impl DistilledSeq2Seq {
    pub fn load(path: &str) -> Result<DistilledSeq2Seq> {
        Ok(DistilledSeq2Seq {
            artifact: AnonymizerArtifact::load(path)?,
        })
    }

    pub fn from_artifact(artifact: AnonymizerArtifact) -> DistilledSeq2Seq {
        DistilledSeq2Seq { artifact }
    }
}

impl Seq2Seq for DistilledSeq2Seq {
    fn generate(&self, text: &str) -> Result<String> {
        self.artifact.anonymize(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, source: &str, target: &str, split: Split) -> CorpusPair {
        CorpusPair {
            prompt_id: id.into(),
            source: source.into(),
            target: target.into(),
            split,
        }
    }

    /// A corpus where capitalized mid-sentence names get replaced and
    /// everything else is copied.
    fn name_corpus(n: usize) -> PairCorpus {
        let names = ["Milo", "Tara", "Finn", "Nova", "Remy", "Sage"];
        let repls = ["Quinn", "Arden", "Blair"];
        let mut pairs = Vec::new();
        for i in 0..n {
            let name = names[i % names.len()];
            let repl = repls[i % repls.len()];
            let source = format!("the report was sent by {name} yesterday .");
            let target = format!("the report was sent by {repl} yesterday .");
            let split = if i % 20 == 0 { Split::Val } else { Split::Train };
            pairs.push(pair(&format!("p{i}"), &source, &target, split));
        }
        PairCorpus {
            pairs,
            generation_config_hash: "testhash".into(),
        }
    }

    fn toy_config() -> DistillConfig {
        DistillConfig {
            learning_rate: 0.5,
            weight_decay: 1e-3,
            epochs: 6,
            batch_size: 8,
            base_model: "wordsub-logistic-v1".into(),
            seed: 5,
        }
    }

    #[test]
    fn zero_pair_corpus_is_rejected() {
        let corpus = PairCorpus {
            pairs: Vec::new(),
            generation_config_hash: "h".into(),
        };
        assert!(train_anonymizer(&corpus, &toy_config()).is_err());
    }

    #[test]
    fn training_reduces_validation_loss() {
        let outcome = train_anonymizer(&name_corpus(200), &toy_config()).unwrap();
        let vals: Vec<f64> = outcome
            .log
            .iter()
            .filter(|e| e.split == "val")
            .map(|e| e.loss)
            .collect();
        assert!(vals.len() >= 2);
        assert!(
            vals.last().unwrap() < vals.first().unwrap(),
            "val loss: {vals:?}"
        );
    }

    #[test]
    fn training_is_seed_reproducible() {
        let a = train_anonymizer(&name_corpus(100), &toy_config()).unwrap();
        let b = train_anonymizer(&name_corpus(100), &toy_config()).unwrap();
        assert_eq!(a.log.len(), b.log.len());
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.step, y.step);
            assert_eq!(x.split, y.split);
            assert!((x.loss - y.loss).abs() < 1e-4);
        }
        assert_eq!(a.artifact, b.artifact);
    }

    #[test]
    fn trained_model_replaces_held_out_names() {
        let outcome = train_anonymizer(&name_corpus(200), &toy_config()).unwrap();
        // Name never seen in training.
        let out = outcome
            .artifact
            .anonymize("the report was sent by Walter yesterday .")
            .unwrap();
        assert_ne!(out, "the report was sent by Walter yesterday .");
        assert!(!out.contains("Walter"), "got: {out}");
        assert!(out.starts_with("the report was sent by"), "got: {out}");
    }

    #[test]
    fn empty_input_is_rejected() {
        let outcome = train_anonymizer(&name_corpus(50), &toy_config()).unwrap();
        assert!(outcome.artifact.anonymize("").is_err());
        assert!(anonymize_lightweight("", &outcome.artifact).is_err());
    }

    #[test]
    fn artifact_round_trips_through_disk() {
        let outcome = train_anonymizer(&name_corpus(50), &toy_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        outcome.artifact.save(&path).unwrap();
        let back = AnonymizerArtifact::load(&path).unwrap();
        assert_eq!(back, outcome.artifact);

        let seq2seq = DistilledSeq2Seq::load(path.to_str().unwrap()).unwrap();
        let a = seq2seq.generate("the report was sent by Milo yesterday .").unwrap();
        let b = outcome
            .artifact
            .anonymize("the report was sent by Milo yesterday .")
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_config_matches_published_values() {
        let cfg = DistillConfig::default();
        assert_eq!(cfg.learning_rate, 1e-4);
        assert_eq!(cfg.weight_decay, 1e-2);
    }

    fn blank_artifact() -> AnonymizerArtifact {
        AnonymizerArtifact {
            base_model: "wordsub-logistic-v1".into(),
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            weights: vec![0.0; NUM_FEATURES],
            substitutions: BTreeMap::new(),
            fallback_capitalized: None,
            fallback_digit: None,
            fallback_other: None,
            frequencies: BTreeMap::new(),
            train_config: DistillConfig::default(),
            corpus_hash: String::new(),
        }
    }

    #[test]
    fn untrained_artifact_echoes_input() {
        let artifact = blank_artifact();
        let text = "Milo likes soup.";
        assert_eq!(artifact.anonymize(text).unwrap(), text);
    }

    #[test]
    fn oversized_input_is_a_length_error() {
        let artifact = blank_artifact();
        let long = "word ".repeat(ANONYMIZER_CONTEXT_WINDOW + 1);
        assert!(matches!(
            artifact.anonymize(&long),
            Err(Error::Length(_))
        ));
    }
}
