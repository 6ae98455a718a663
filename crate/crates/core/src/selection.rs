//! Choosing which words to protect.
//!
//! The protection ratio scales with prompt entropy through a sigmoid;
//! the word set is the lowest-importance prefix of that size, filtered
//! to content words. No backfill happens after the POS filter, so the
//! selected set can be smaller than the ratio implies.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scoring::WordScores;
use crate::segmentation::WordSpan;

/// Outcome of word selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Fraction of words targeted for protection.
    pub gamma: f64,
    /// Picked word indices ordered by ascending importance.
    pub picked: Vec<usize>,
    /// Picked indices that survive the content-POS filter.
    pub selected: BTreeSet<usize>,
}

/// Adaptive protection ratio: `lambda * sigmoid(entropy)`.
///
/// `lambda` must lie in (0, 1]; with entropy >= 0 the ratio lies in
/// [lambda/2, lambda).
pub fn protection_ratio(entropy: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("lambda must be in (0, 1], got {lambda}")));
    }
    if entropy < 0.0 {
        return Err(Error::InvalidInput(format!("entropy must be >= 0, got {entropy}")));
    }
    Ok(lambda / (1.0 + (-entropy).exp()))
}

fn result_from_picked(gamma: f64, picked: Vec<usize>, words: &[WordSpan]) -> SelectionResult {
    let selected = picked
        .iter()
        .copied()
        .filter(|&i| words[i].is_content)
        .collect();
    SelectionResult {
        gamma,
        picked,
        selected,
    }
}

fn target_count(gamma: f64, word_count: usize) -> usize {
    ((gamma * word_count as f64).ceil() as usize).min(word_count)
}

/// Pick the `ceil(gamma * k)` least important words.
///
/// Ties on importance prefer the higher privacy score, then the lower
/// index, making selection fully deterministic.
pub fn select_words(scores: &WordScores, words: &[WordSpan], gamma: f64) -> Result<SelectionResult> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must be in [0, 1], got {gamma}")));
    }
    if scores.importance.len() != words.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} words",
            scores.importance.len(),
            words.len()
        )));
    }
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| {
        scores.importance[a]
            .total_cmp(&scores.importance[b])
            .then(scores.privacy[b].total_cmp(&scores.privacy[a]))
            .then(a.cmp(&b))
    });
    let take = target_count(gamma, words.len());
    order.truncate(take);
    Ok(result_from_picked(gamma, order, words))
}

/// Ablation selection: the same number of words, drawn uniformly at
/// random instead of by importance.
pub fn select_words_random(
    words: &[WordSpan],
    gamma: f64,
    rng: &mut impl Rng,
) -> Result<SelectionResult> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must be in [0, 1], got {gamma}")));
    }
    let take = target_count(gamma, words.len());
    let mut indices: Vec<usize> = (0..words.len()).collect();
    indices.shuffle(rng);
    indices.truncate(take);
    indices.sort_unstable();
    Ok(result_from_picked(gamma, indices, words))
}
