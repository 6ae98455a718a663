//! Per-word importance and privacy scoring.
//!
//! Importance is the min-max-normalized L2 norm of the loss gradient
//! averaged over a word's tokens. Privacy is the min-max-normalized
//! word self-information (sum of token surprisals, in bits). Prompt
//! entropy is the mean word self-information and drives the adaptive
//! protection ratio downstream.

use crate::backends::{CausalLm, CausalTrace};
use crate::error::{Error, Result};
use crate::segmentation::{Prompt, TokenAlignment, WordSpan};

/// Per-word scores plus prompt-level entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct WordScores {
    /// L2 norm of the token-averaged gradient, per word.
    pub grad_norm: Vec<f64>,
    /// Min-max normalized gradient norm, in [0, 1].
    pub importance: Vec<f64>,
    /// Word self-information in bits, >= 0.
    pub self_info: Vec<f64>,
    /// Min-max normalized self-information, in [0, 1].
    pub privacy: Vec<f64>,
    /// Mean word self-information in bits.
    pub entropy: f64,
}

/// Min-max normalize; when all values are equal every score is 0.5
/// (no evidence to prefer any word).
pub fn minmax(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !min.is_finite() || !max.is_finite() || (max - min).abs() < f64::EPSILON * max.abs().max(1.0)
    {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Element-wise mean of the token gradients covering word `word_index`.
pub fn word_gradient(trace: &CausalTrace, alignment: &TokenAlignment, word_index: usize) -> Vec<f64> {
    let range = alignment.token_range(word_index);
    let count = range.len() as f64;
    let dim = trace.grads.get(range.start).map(Vec::len).unwrap_or(0);
    let mut mean = vec![0.0; dim];
    for ti in range {
        for (m, g) in mean.iter_mut().zip(&trace.grads[ti]) {
            *m += g;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    mean
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gradient norms per word.
pub fn gradient_norms(trace: &CausalTrace, alignment: &TokenAlignment) -> Vec<f64> {
    (0..alignment.word_count())
        .map(|j| l2(&word_gradient(trace, alignment, j)))
        .collect()
}

/// Min-max normalized gradient norms per word.
pub fn importance_scores(trace: &CausalTrace, alignment: &TokenAlignment) -> Vec<f64> {
    minmax(&gradient_norms(trace, alignment))
}

/// Token surprisal in bits: the negated base-2 log-probability.
pub fn token_self_information(trace: &CausalTrace) -> Vec<f64> {
    trace.logprob2.iter().map(|lp| -lp).collect()
}

/// Word self-information: sum of token surprisals over the word's range.
pub fn word_self_information(token_info: &[f64], alignment: &TokenAlignment, word_index: usize) -> f64 {
    alignment
        .token_range(word_index)
        .map(|ti| token_info[ti])
        .sum()
}

/// Min-max normalized self-information per word.
pub fn privacy_scores(word_info: &[f64]) -> Vec<f64> {
    minmax(word_info)
}

/// Prompt entropy: the mean word self-information.
pub fn prompt_entropy(word_info: &[f64]) -> f64 {
    if word_info.is_empty() {
        return 0.0;
    }
    word_info.iter().sum::<f64>() / word_info.len() as f64
}

/// Compute every per-word score from a trace and its alignment.
pub fn word_scores(trace: &CausalTrace, alignment: &TokenAlignment) -> Result<WordScores> {
    if alignment.word_count() == 0 {
        return Err(Error::InvalidInput("cannot score a prompt with no words".into()));
    }
    let grad_norm = gradient_norms(trace, alignment);
    let importance = minmax(&grad_norm);
    let token_info = token_self_information(trace);
    let self_info: Vec<f64> = (0..alignment.word_count())
        .map(|j| word_self_information(&token_info, alignment, j))
        .collect();
    let privacy = minmax(&self_info);
    let entropy = prompt_entropy(&self_info);
    Ok(WordScores {
        grad_norm,
        importance,
        self_info,
        privacy,
        entropy,
    })
}

/// Reference importance oracle: the absolute loss change from deleting
/// one word from the prompt. Quadratic in prompt length, so it is used
/// only to validate the gradient-based scores in tests.
pub fn deletion_importance(
    backend: &dyn CausalLm,
    prompt: &Prompt,
    target: &str,
    words: &[WordSpan],
    word_index: usize,
) -> Result<f64> {
    let base = backend.causal_trace(prompt, target)?.loss;
    let word = &words[word_index];
    let mut text = String::with_capacity(prompt.text.len());
    text.push_str(&prompt.text[..word.char_start]);
    let mut rest = &prompt.text[word.char_end..];
    // Swallow one following space so deletion does not leave doubles.
    if prompt.text[..word.char_start].ends_with(' ') && rest.starts_with(' ') {
        rest = &rest[1..];
    }
    text.push_str(rest);
    let deleted = Prompt {
        text: text.trim().to_string(),
        ..prompt.clone()
    };
    if deleted.text.is_empty() {
        return Ok(base.abs());
    }
    let perturbed = backend.causal_trace(&deleted, target)?.loss;
    Ok((base - perturbed).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendToken, CausalTrace};
    use crate::segmentation::{align, segment, PosPolicy, TaskKind};

    fn trace_for(words: &str, grads: Vec<Vec<f64>>, logprob2: Vec<f64>) -> (CausalTrace, TokenAlignment) {
        let spans = segment(words, &PosPolicy::default(), TaskKind::Generic).unwrap();
        let tokens: Vec<BackendToken> = spans
            .iter()
            .map(|w| BackendToken {
                surface: w.surface.clone(),
                char_start: w.char_start,
                char_end: w.char_end,
                special: false,
            })
            .collect();
        let alignment = align(&spans, &tokens).unwrap();
        let trace = CausalTrace {
            tokens,
            logprob2,
            grads,
            loss: 0.0,
            temperature: 1.0,
        };
        (trace, alignment)
    }

    #[test]
    fn word_gradient_single_token() {
        let (trace, alignment) = trace_for("hello", vec![vec![3.0, 4.0]], vec![-1.0]);
        assert_eq!(word_gradient(&trace, &alignment, 0), vec![3.0, 4.0]);
    }

    #[test]
    fn word_gradient_multi_token_mean() {
        // Two tokens covering one word: use a synthetic alignment.
        let spans = segment("ab", &PosPolicy::default(), TaskKind::Generic).unwrap();
        let tokens = vec![
            BackendToken { surface: "a".into(), char_start: 0, char_end: 1, special: false },
            BackendToken { surface: "b".into(), char_start: 1, char_end: 2, special: false },
        ];
        let alignment = align(&spans, &tokens).unwrap();
        let trace = CausalTrace {
            tokens,
            logprob2: vec![-1.0, -1.0],
            grads: vec![vec![3.0, 4.0], vec![1.0, 0.0]],
            loss: 0.0,
            temperature: 1.0,
        };
        assert_eq!(word_gradient(&trace, &alignment, 0), vec![2.0, 2.0]);
    }

    #[test]
    fn zero_gradients_stay_zero() {
        let (trace, alignment) = trace_for("hi", vec![vec![0.0, 0.0]], vec![-1.0]);
        assert_eq!(word_gradient(&trace, &alignment, 0), vec![0.0, 0.0]);
    }

    #[test]
    fn minmax_basics() {
        assert_eq!(minmax(&[1.0, 2.0, 3.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax(&[4.0, 4.0, 4.0]), vec![0.5, 0.5, 0.5]);
        assert_eq!(minmax(&[0.0, 10.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn importance_from_hand_computed_norms() {
        let (trace, alignment) = trace_for(
            "ab cd",
            vec![vec![3.0, 4.0], vec![0.0, 0.0]],
            vec![-1.0, -1.0],
        );
        let norms = gradient_norms(&trace, &alignment);
        assert_eq!(norms, vec![5.0, 0.0]);
        assert_eq!(importance_scores(&trace, &alignment), vec![1.0, 0.0]);
    }

    #[test]
    fn token_surprisal_values() {
        let (trace, _) = trace_for(
            "a b c",
            vec![vec![0.0]; 3],
            vec![0.5f64.log2(), 1.0f64.log2(), 0.25f64.log2()],
        );
        assert_eq!(token_self_information(&trace), vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn word_self_information_is_additive() {
        let spans = segment("ab", &PosPolicy::default(), TaskKind::Generic).unwrap();
        let tokens = vec![
            BackendToken { surface: "a".into(), char_start: 0, char_end: 1, special: false },
            BackendToken { surface: "b".into(), char_start: 1, char_end: 2, special: false },
        ];
        let alignment = align(&spans, &tokens).unwrap();
        assert_eq!(word_self_information(&[2.0, 3.0], &alignment, 0), 5.0);
    }

    #[test]
    fn privacy_and_entropy() {
        assert_eq!(privacy_scores(&[1.0, 2.0, 3.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(prompt_entropy(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(prompt_entropy(&[0.0]), 0.0);
        assert_eq!(prompt_entropy(&[5.0, 5.0]), 5.0);
    }

    mod deletion_oracle {
        use super::super::*;
        use crate::backends::stub::{CausalMode, CausalSpec, StubCausal, StubSpec, TokenEntry};
        use crate::backends::CausalLm;
        use crate::segmentation::{segment, PosPolicy, TaskKind};
        use std::collections::BTreeMap;

        fn bag_backend(alphas: &[(&str, f64)]) -> StubCausal {
            let mut tokens = BTreeMap::new();
            for (i, (name, alpha)) in alphas.iter().enumerate() {
                tokens.insert(
                    name.to_string(),
                    TokenEntry {
                        prob: 0.5,
                        grad: None,
                        embedding: Some(vec![1.0 + i as f64, 0.5 * i as f64]),
                        alpha: *alpha,
                    },
                );
            }
            tokens.insert(
                "target".to_string(),
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
                    default_decode: "target".into(),
                }),
                masked: None,
                seq2seq: None,
            };
            StubCausal::from_spec(&spec).unwrap()
        }

        #[test]
        fn deleting_a_zero_weight_word_changes_nothing() {
            let backend = bag_backend(&[("aa", 1.5), ("bb", 0.0), ("cc", 0.7)]);
            let prompt = Prompt::new("p", "aa bb cc");
            let words = segment(&prompt.text, &PosPolicy::default(), TaskKind::Generic).unwrap();
            let delta = deletion_importance(&backend, &prompt, "target", &words, 1).unwrap();
            assert!(delta.abs() < 1e-12, "delta={delta}");
        }

        #[test]
        fn deleting_the_dominant_word_moves_the_loss_most() {
            let backend = bag_backend(&[("aa", 0.2), ("bb", 6.0), ("cc", 0.3), ("dd", 0.25)]);
            let prompt = Prompt::new("p", "aa bb cc dd");
            let words = segment(&prompt.text, &PosPolicy::default(), TaskKind::Generic).unwrap();
            let deltas: Vec<f64> = (0..words.len())
                .map(|j| deletion_importance(&backend, &prompt, "target", &words, j).unwrap())
                .collect();
            let argmax = deltas
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, 1, "deltas={deltas:?}");
        }

        #[test]
        fn unperturbed_prompt_has_zero_loss_delta() {
            let backend = bag_backend(&[("aa", 1.0), ("bb", 2.0)]);
            let prompt = Prompt::new("p", "aa bb");
            let a = backend.causal_trace(&prompt, "target").unwrap().loss;
            let b = backend.causal_trace(&prompt, "target").unwrap().loss;
            assert_eq!((a - b).abs(), 0.0);
        }
    }

    #[test]
    fn token_count_neutrality() {
        // One word over one token vs the same per-token gradient spread
        // over three tokens: the averaged word gradient is unchanged.
        let spans = segment("abc", &PosPolicy::default(), TaskKind::Generic).unwrap();
        let one = vec![BackendToken { surface: "abc".into(), char_start: 0, char_end: 3, special: false }];
        let three = vec![
            BackendToken { surface: "a".into(), char_start: 0, char_end: 1, special: false },
            BackendToken { surface: "b".into(), char_start: 1, char_end: 2, special: false },
            BackendToken { surface: "c".into(), char_start: 2, char_end: 3, special: false },
        ];
        let g = vec![0.7, -0.2];
        let t1 = CausalTrace {
            tokens: one.clone(),
            logprob2: vec![-1.0],
            grads: vec![g.clone()],
            loss: 0.0,
            temperature: 1.0,
        };
        let t3 = CausalTrace {
            tokens: three.clone(),
            logprob2: vec![-1.0; 3],
            grads: vec![g.clone(), g.clone(), g.clone()],
            loss: 0.0,
            temperature: 1.0,
        };
        let a1 = align(&spans, &one).unwrap();
        let a3 = align(&spans, &three).unwrap();
        let w1 = word_gradient(&t1, &a1, 0);
        let w3 = word_gradient(&t3, &a3, 0);
        for (x, y) in w1.iter().zip(&w3) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
