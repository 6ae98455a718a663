//! Replacement generation, reweighting, sampling, and prompt assembly.
//!
//! For each selected word the masked LM proposes candidates; the
//! smallest top-probability prefix whose cumulative mass reaches the
//! `tau` threshold becomes the candidate set. Sampling probabilities
//! are recomputed as a softmax of `(importance - privacy) * similarity`,
//! so important low-risk words favor close candidates while
//! unimportant high-risk words favor distant ones. Words are replaced
//! left to right, each mask query seeing the text with earlier
//! replacements already applied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{BackendSet, MaskCandidates};
use crate::config::{derive_seed, Ablation, RunConfig};
use crate::error::{Error, Result};
use crate::scoring;
use crate::segmentation::{align, segment, Prompt, WordSpan};
use crate::selection::{protection_ratio, select_words, select_words_random};
use crate::similarity::{same_lemma, similarity};

/// One replacement candidate with all per-candidate quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub surface: String,
    /// Masked-LM probability.
    pub mlm_prob: f64,
    /// Similarity to the original word, in [0, 1].
    pub similarity: f64,
    /// Reweighted sampling probability; sums to 1 over the set.
    pub reweighted: f64,
}

/// The candidate set for one selected word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub word_index: usize,
    pub original_surface: String,
    pub tau: f64,
    pub candidates: Vec<Candidate>,
}

/// Truncate descending-probability predictions at cumulative mass `tau`.
///
/// Returns the smallest prefix whose cumulative probability reaches
/// `tau`; if the full list never reaches it, all candidates are kept.
/// Always returns at least one candidate.
pub fn candidate_set(preds: &MaskCandidates, tau: f64) -> Result<Vec<(String, f64)>> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("tau must be in (0, 1], got {tau}")));
    }
    preds.validate()?;
    let mut out = Vec::new();
    let mut cumulative = 0.0;
    for (surface, p) in &preds.candidates {
        out.push((surface.clone(), *p));
        cumulative += *p;
        if cumulative >= tau {
            break;
        }
    }
    Ok(out)
}

/// Softmax of `(importance - privacy) * similarity` per candidate.
pub fn reweight(importance: f64, privacy: f64, similarities: &[f64]) -> Vec<f64> {
    let scale = importance - privacy;
    let logits: Vec<f64> = similarities.iter().map(|s| scale * s).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Renormalize masked-LM probabilities (raw-probability ablation).
pub fn renormalize(probs: &[f64]) -> Vec<f64> {
    let sum: f64 = probs.iter().sum();
    probs.iter().map(|p| p / sum).collect()
}

/// Categorical draw from a probability vector summing to 1.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    debug_assert!(!probs.is_empty());
    let draw: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if draw < cumulative {
            return i;
        }
    }
    probs.len() - 1
}

/// Carry the original's capitalization pattern onto the replacement.
pub(crate) fn apply_casing(original: &str, candidate: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let all_upper = original.chars().count() > 1
        && original.chars().all(|c| !c.is_alphabetic() || c.is_uppercase());
    if all_upper {
        return candidate.to_uppercase();
    }
    if first_upper {
        let mut out = String::with_capacity(candidate.len());
        let mut cs = candidate.chars();
        if let Some(c) = cs.next() {
            out.extend(c.to_uppercase());
        }
        out.extend(cs);
        return out;
    }
    candidate.to_string()
}

/// One applied replacement, recorded against the original text's spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub word_index: usize,
    pub original_surface: String,
    pub chosen_surface: String,
    /// Byte span in the original text.
    pub char_start: usize,
    pub char_end: usize,
    pub importance: f64,
    pub privacy: f64,
    pub similarity: f64,
}

/// A selected word that could not be replaced, kept with a warning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedWord {
    pub word_index: usize,
    pub original_surface: String,
    pub reason: String,
}

/// Audit-grade record of one sanitized prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizedPair {
    pub prompt_id: String,
    pub original_text: String,
    pub anonymized_text: String,
    pub replacements: Vec<Replacement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedWord>,
    pub config: RunConfig,
    pub config_hash: String,
    pub rng_seed: u64,
}

impl AnonymizedPair {
    /// Rebuild the anonymized text from the original plus replacement
    /// records; used to check replacement locality.
    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(self.original_text.len());
        let mut cursor = 0;
        for r in &self.replacements {
            out.push_str(&self.original_text[cursor..r.char_start]);
            out.push_str(&r.chosen_surface);
            cursor = r.char_end;
        }
        out.push_str(&self.original_text[cursor..]);
        out
    }
}

/// Build the full candidate set for one word, excluding the original
/// surface so a selected word always changes.
pub fn build_candidate_set(
    word: &WordSpan,
    preds: &MaskCandidates,
    importance: f64,
    privacy: f64,
    tau: f64,
    ablation: Ablation,
) -> Result<CandidateSet> {
    let truncated = candidate_set(preds, tau)?;
    let kept: Vec<(String, f64)> = truncated
        .into_iter()
        .filter(|(surface, _)| !same_lemma(surface, &word.surface))
        .collect();
    let sims: Vec<f64> = kept
        .iter()
        .map(|(surface, _)| similarity(&word.surface, surface))
        .collect();
    let weights = if kept.is_empty() {
        Vec::new()
    } else {
        match ablation {
            Ablation::RawProb => renormalize(&kept.iter().map(|(_, p)| *p).collect::<Vec<_>>()),
            _ => reweight(importance, privacy, &sims),
        }
    };
    let candidates = kept
        .into_iter()
        .zip(sims)
        .zip(weights)
        .map(|(((surface, mlm_prob), similarity), reweighted)| Candidate {
            surface,
            mlm_prob,
            similarity,
            reweighted,
        })
        .collect();
    Ok(CandidateSet {
        word_index: word.index,
        original_surface: word.surface.clone(),
        tau,
        candidates,
    })
}

/// Run the full per-prompt pipeline: segment, trace, score, select,
/// and replace left to right.
pub fn sanitize_prompt(
    prompt: &Prompt,
    cfg: &RunConfig,
    backends: &BackendSet,
) -> Result<AnonymizedPair> {
    sanitize_prompt_inner(prompt, cfg, backends).map_err(|e| e.for_prompt(&prompt.id))
}

fn sanitize_prompt_inner(
    prompt: &Prompt,
    cfg: &RunConfig,
    backends: &BackendSet,
) -> Result<AnonymizedPair> {
    prompt.validate()?;
    let policy = cfg.pos_policy()?;
    let words = segment(&prompt.text, &policy, prompt.task_kind)?;

    let target = match &prompt.reference_output {
        Some(y) if !y.is_empty() => y.clone(),
        _ => backends.causal.greedy_decode(&prompt.text, 12)?,
    };
    let trace = backends.causal.causal_trace(prompt, &target)?;
    let alignment = align(&words, &trace.tokens)?;
    let scores = scoring::word_scores(&trace, &alignment)?;

    let rng_seed = derive_seed(cfg.seed, &prompt.id);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let gamma = match cfg.ablation {
        Ablation::FixedRatio => cfg
            .fixed_gamma
            .ok_or_else(|| Error::Config("fixed-ratio ablation requires fixed_gamma".into()))?,
        _ => protection_ratio(scores.entropy, cfg.lambda)?,
    };
    let selection = match cfg.ablation {
        Ablation::RandomSelect => select_words_random(&words, gamma, &mut rng)?,
        _ => select_words(&scores, &words, gamma)?,
    };

    let mut text = prompt.text.clone();
    let mut delta = 0i64;
    let mut replacements = Vec::new();
    let mut skipped = Vec::new();

    for &wi in selection.selected.iter() {
        let word = &words[wi];
        let start = (word.char_start as i64 + delta) as usize;
        let end = (word.char_end as i64 + delta) as usize;

        let mut masked = String::with_capacity(text.len());
        masked.push_str(&text[..start]);
        masked.push_str(backends.masked.mask_token());
        masked.push_str(&text[end..]);

        let preds = backends.masked.mask_predict(&masked, cfg.top_k)?;
        let cset = build_candidate_set(
            word,
            &preds,
            scores.importance[wi],
            scores.privacy[wi],
            cfg.tau,
            cfg.ablation,
        )?;
        if cset.candidates.is_empty() {
            skipped.push(SkippedWord {
                word_index: wi,
                original_surface: word.surface.clone(),
                reason: "candidate set empty after excluding the original word".into(),
            });
            continue;
        }
        let weights: Vec<f64> = cset.candidates.iter().map(|c| c.reweighted).collect();
        let pick = sample_index(&weights, &mut rng);
        let chosen = apply_casing(&word.surface, &cset.candidates[pick].surface);

        let mut next = String::with_capacity(text.len());
        next.push_str(&text[..start]);
        next.push_str(&chosen);
        next.push_str(&text[end..]);
        text = next;
        delta += chosen.len() as i64 - (end - start) as i64;

        replacements.push(Replacement {
            word_index: wi,
            original_surface: word.surface.clone(),
            chosen_surface: chosen,
            char_start: word.char_start,
            char_end: word.char_end,
            importance: scores.importance[wi],
            privacy: scores.privacy[wi],
            similarity: cset.candidates[pick].similarity,
        });
    }

    Ok(AnonymizedPair {
        prompt_id: prompt.id.clone(),
        original_text: prompt.text.clone(),
        anonymized_text: text,
        replacements,
        skipped,
        config: cfg.clone(),
        config_hash: cfg.hash(),
        rng_seed,
    })
}
