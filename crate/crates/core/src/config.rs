//! Run configuration, validation, and config hashing.
//!
//! A validated snapshot of the configuration (plus its hash and the
//! seed) is embedded in every output artifact so any run can be
//! reconstructed from its outputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::segmentation::PosPolicy;

/// Ablation switches for the sanitization pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Full pipeline.
    #[default]
    None,
    /// Constant protection ratio instead of the entropy-adaptive one.
    FixedRatio,
    /// Uniform random word selection instead of lowest-importance-first.
    RandomSelect,
    /// Sample replacements from raw masked-LM probabilities instead of
    /// the similarity-reweighted distribution.
    RawProb,
}

fn default_causal() -> String {
    "stub:default".to_string()
}
fn default_masked() -> String {
    "stub:default".to_string()
}
fn default_seq2seq() -> String {
    "stub:echo".to_string()
}
fn default_device() -> String {
    "cpu".to_string()
}
fn default_lambda() -> f64 {
    0.4
}
fn default_tau() -> f64 {
    0.9
}
fn default_top_k() -> usize {
    50
}
fn default_pos_set() -> Vec<String> {
    vec!["NOUN".into(), "PROPN".into(), "NUM".into(), "ADJ".into()]
}
fn default_workers() -> usize {
    1
}
fn default_temperature() -> f64 {
    1.0
}

/// Validated pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_causal")]
    pub causal_model: String,
    #[serde(default = "default_masked")]
    pub masked_model: String,
    #[serde(default = "default_seq2seq")]
    pub seq2seq_model: String,
    #[serde(default = "default_device")]
    pub device: String,
    /// Scaling factor for the adaptive protection ratio, in (0, 1].
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Cumulative-probability cutoff for the masked-LM candidate set.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Masked-LM candidates requested per slot.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// POS tags treated as replaceable content words.
    #[serde(default = "default_pos_set")]
    pub content_pos_set: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ablation: Ablation,
    /// Protection ratio override used by the fixed-ratio ablation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_gamma: Option<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Decoding temperature recorded with traces; evaluation setting
    /// only, never used by the sanitization math.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are total")
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!("lambda must be in (0, 1], got {}", self.lambda)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if let Some(g) = self.fixed_gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!("fixed_gamma must be in [0, 1], got {g}")));
            }
        }
        if self.ablation == Ablation::FixedRatio && self.fixed_gamma.is_none() {
            return Err(Error::Config("fixed-ratio ablation requires fixed_gamma".into()));
        }
        self.pos_policy()?;
        Ok(())
    }

    pub fn pos_policy(&self) -> Result<PosPolicy> {
        PosPolicy::from_names(&self.content_pos_set)
    }

    /// Hex digest of the canonical JSON form; embedded in artifacts.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// Stable per-prompt RNG seed, independent of worker scheduling.
pub fn derive_seed(seed: u64, prompt_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(prompt_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.lambda = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.tau = 1.5;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.ablation = Ablation::FixedRatio;
        assert!(cfg.validate().is_err(), "fixed ratio needs fixed_gamma");
        cfg.fixed_gamma = Some(0.5);
        cfg.validate().unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.lambda = 0.5;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn derived_seeds_differ_by_prompt() {
        assert_ne!(derive_seed(7, "a"), derive_seed(7, "b"));
        assert_eq!(derive_seed(7, "a"), derive_seed(7, "a"));
        assert_ne!(derive_seed(7, "a"), derive_seed(8, "a"));
    }

    #[test]
    fn ablation_serde_names() {
        assert_eq!(serde_json::to_string(&Ablation::RandomSelect).unwrap(), "\"random-select\"");
        assert_eq!(serde_json::to_string(&Ablation::RawProb).unwrap(), "\"raw-prob\"");
        let parsed: Ablation = serde_json::from_str("\"fixed-ratio\"").unwrap();
        assert_eq!(parsed, Ablation::FixedRatio);
    }
}
