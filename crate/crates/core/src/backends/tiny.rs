//! Small real language models for desk-scale directional checks.
//!
//! `tiny:causal` and `tiny:masked` are bag-of-context softmax models
//! trained once per process on an embedded corpus with a fixed seed,
//! so their weights are identical on every run. The causal variant
//! predicts each token from the mean embedding of all preceding
//! tokens (plus a begin-of-sequence sentinel); the masked variant
//! predicts a word from the mean embedding of the rest of its
//! sentence. Both expose exact analytic gradients of the generation
//! loss with respect to input embeddings.
//!
//! These are deliberately small: enough to rank frequent function
//! words above out-of-corpus named entities in probability, which is
//! the property the directional evaluations need.

use std::collections::HashMap;
use std::sync::Arc;

use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lexer;
use crate::segmentation::Prompt;

use super::{find_single_mask, BackendToken, CausalLm, CausalTrace, MaskCandidates, MaskedLm, MASK_TOKEN};

const CORPUS: &str = include_str!("../../data/tiny_corpus.txt");
const DIM: usize = 20;
const EPOCHS: usize = 25;
const BASE_LR: f64 = 0.25;
const TRAIN_SEED: u64 = 0x5eed_0001;
const MIN_COUNT: usize = 2;
const CONTEXT_WINDOW: usize = 512;
const LN2: f64 = std::f64::consts::LN_2;
/// Uniform mixture weight applied at inference; keeps reported
/// probabilities calibrated away from the softmax's overconfident
/// tails on out-of-corpus contexts.
const SMOOTHING: f64 = 0.05;
/// The `<unk>` class covers the whole unseen vocabulary, so the
/// probability of one specific unseen token is its share of that mass.
const UNK_FANOUT: f64 = 1000.0;

const BOS: usize = 0;
const EOS: usize = 1;
const UNK: usize = 2;
const SPECIALS: usize = 3;

struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn build(lines: &[Vec<String>]) -> Vocab {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for line in lines {
            for w in line {
                *counts.entry(w.as_str()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<&str> = counts
            .iter()
            .filter(|&(_, &c)| c >= MIN_COUNT)
            .map(|(&w, _)| w)
            .collect();
        kept.sort_unstable();
        let mut words = vec!["<bos>".to_string(), "<eos>".to_string(), "<unk>".to_string()];
        words.extend(kept.iter().map(|w| w.to_string()));
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocab { words, index }
    }

    fn id(&self, word: &str) -> usize {
        self.index.get(&word.to_lowercase()).copied().unwrap_or(UNK)
    }

    fn len(&self) -> usize {
        self.words.len()
    }
}

/// Bag-of-context softmax language model.
pub struct CbowModel {
    vocab: Vocab,
    emb: Vec<f64>,
    out: Vec<f64>,
    bias: Vec<f64>,
}

fn corpus_lines() -> Vec<Vec<String>> {
    CORPUS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            lexer::lex(l)
                .into_iter()
                .map(|t| t.surface.to_lowercase())
                .collect()
        })
        .collect()
}

impl CbowModel {
    fn train(causal: bool) -> CbowModel {
        let lines = corpus_lines();
        let vocab = Vocab::build(&lines);
        let v = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(TRAIN_SEED ^ if causal { 0 } else { 1 });
        let mut model = CbowModel {
            emb: (0..v * DIM).map(|_| rng.gen_range(-0.1..0.1)).collect(),
            out: (0..v * DIM).map(|_| rng.gen_range(-0.1..0.1)).collect(),
            bias: vec![0.0; v],
            vocab,
        };

        let line_ids: Vec<Vec<usize>> = lines
            .iter()
            .map(|line| line.iter().map(|w| model.vocab.id(w)).collect())
            .collect();
        let mut order: Vec<usize> = (0..line_ids.len()).collect();

        for epoch in 0..EPOCHS {
            let lr = BASE_LR * (1.0 - epoch as f64 / EPOCHS as f64) + 0.02;
            // Fisher-Yates with the seeded rng keeps training deterministic.
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for &li in &order {
                let ids = &line_ids[li];
                if causal {
                    let mut seq = Vec::with_capacity(ids.len() + 2);
                    seq.push(BOS);
                    seq.extend_from_slice(ids);
                    seq.push(EOS);
                    for i in 1..seq.len() {
                        model.sgd_step(&seq[..i], seq[i], lr);
                    }
                } else {
                    if ids.len() < 2 {
                        continue;
                    }
                    for i in 0..ids.len() {
                        let ctx: Vec<usize> = ids[..i]
                            .iter()
                            .chain(ids[i + 1..].iter())
                            .copied()
                            .collect();
                        model.sgd_step(&ctx, ids[i], lr);
                    }
                }
            }
        }
        model
    }

    fn context_mean(&self, ctx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; DIM];
        for &id in ctx {
            let row = &self.emb[id * DIM..(id + 1) * DIM];
            for (ck, rk) in c.iter_mut().zip(row) {
                *ck += rk;
            }
        }
        let n = ctx.len() as f64;
        for ck in &mut c {
            *ck /= n;
        }
        c
    }

    /// Context vector and softmax distribution over the vocabulary.
    fn forward(&self, ctx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let c = self.context_mean(ctx);
        let v = self.vocab.len();
        let mut logits = vec![0.0; v];
        for (j, logit) in logits.iter_mut().enumerate() {
            let row = &self.out[j * DIM..(j + 1) * DIM];
            *logit = self.bias[j] + row.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        }
        let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for l in &mut logits {
            *l = (*l - max).exp();
            sum += *l;
        }
        for l in &mut logits {
            *l /= sum;
        }
        (c, logits)
    }

    /// Smoothed distribution over the vocabulary given context ids.
    fn predict(&self, ctx: &[usize]) -> Vec<f64> {
        let mut probs = self.forward(ctx).1;
        let v = probs.len() as f64;
        for p in &mut probs {
            *p = (1.0 - SMOOTHING) * *p + SMOOTHING / v;
        }
        probs
    }

    fn sgd_step(&mut self, ctx: &[usize], target: usize, lr: f64) {
        let (c, mut probs) = self.forward(ctx);
        let v = self.vocab.len();
        probs[target] -= 1.0;

        let mut grad_ctx = vec![0.0; DIM];
        for j in 0..v {
            let g = probs[j];
            let row = &mut self.out[j * DIM..(j + 1) * DIM];
            for k in 0..DIM {
                grad_ctx[k] += g * row[k];
                row[k] -= lr * g * c[k];
            }
            self.bias[j] -= lr * g;
        }
        let n = ctx.len() as f64;
        for &id in ctx {
            let row = &mut self.emb[id * DIM..(id + 1) * DIM];
            for k in 0..DIM {
                row[k] -= lr * grad_ctx[k] / n;
            }
        }
    }

    /// Backpropagated gradient of the smoothed loss `-ln q[target]`
    /// (with `q = (1-eps) * softmax + eps/V`) with respect to the
    /// shared context vector. `raw` is the unsmoothed softmax.
    fn context_grad(&self, raw: &[f64], target: usize) -> Vec<f64> {
        let v = raw.len() as f64;
        let q_target = (1.0 - SMOOTHING) * raw[target] + SMOOTHING / v;
        let weight = (1.0 - SMOOTHING) * raw[target] / q_target;
        let mut g = vec![0.0; DIM];
        for (j, &p) in raw.iter().enumerate() {
            let coeff = weight * if j == target { p - 1.0 } else { p };
            let row = &self.out[j * DIM..(j + 1) * DIM];
            for k in 0..DIM {
                g[k] += coeff * row[k];
            }
        }
        g
    }
}

static TINY_CAUSAL: Lazy<Arc<CbowModel>> = Lazy::new(|| Arc::new(CbowModel::train(true)));
static TINY_MASKED: Lazy<Arc<CbowModel>> = Lazy::new(|| Arc::new(CbowModel::train(false)));

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

/// Causal tiny model backend.
pub struct TinyCausalLm {
    model: Arc<CbowModel>,
}

impl TinyCausalLm {
    /// Process-wide instance; training happens on first use.
    pub fn shared() -> TinyCausalLm {
        TinyCausalLm {
            model: Arc::clone(&TINY_CAUSAL),
        }
    }
}

impl CbowModel {
    fn is_boundary(&self, id: usize) -> bool {
        matches!(self.vocab.words[id].as_str(), "." | "!" | "?")
    }

    /// Context ids for predicting position `i` of `ids`: a sentence
    /// sentinel plus the current sentence's tokens so far. The model
    /// trains on single-sentence lines, so scoring resets at sentence
    /// boundaries to stay on-distribution for multi-sentence texts.
    fn context_at(&self, ids: &[usize], sent_start: usize, i: usize) -> Vec<usize> {
        let mut ctx = Vec::with_capacity(i - sent_start + 1);
        ctx.push(BOS);
        ctx.extend_from_slice(&ids[sent_start..i]);
        ctx
    }

    /// Smoothed probability of `token` under the raw softmax, with the
    /// unseen-vocabulary share applied to `<unk>`.
    fn calibrated_prob(&self, raw: &[f64], token: usize) -> f64 {
        let mut q = (1.0 - SMOOTHING) * raw[token] + SMOOTHING / raw.len() as f64;
        if token == UNK {
            q /= UNK_FANOUT;
        }
        q
    }
}

impl CausalLm for TinyCausalLm {
    fn tokenize(&self, text: &str) -> Vec<BackendToken> {
        tokenize_plain(text)
    }

    fn causal_trace(&self, prompt: &Prompt, target: &str) -> Result<CausalTrace> {
        let m = &self.model;
        let tokens = self.tokenize(&prompt.text);
        if tokens.is_empty() {
            return Err(Error::InvalidInput("prompt text has no tokens".into()));
        }
        let target_tokens = tokenize_plain(target);
        if target_tokens.is_empty() {
            return Err(Error::InvalidInput("loss target must be non-empty".into()));
        }
        let total = tokens.len() + target_tokens.len();
        if total > CONTEXT_WINDOW {
            return Err(Error::Length(format!(
                "{total} tokens exceed context window {CONTEXT_WINDOW}"
            )));
        }

        let prompt_len = tokens.len();
        let mut ids = Vec::with_capacity(total);
        ids.extend(tokens.iter().map(|t| m.vocab.id(&t.surface)));
        ids.extend(target_tokens.iter().map(|t| m.vocab.id(&t.surface)));

        let mut logprob2 = Vec::with_capacity(prompt_len);
        let mut grads = vec![vec![0.0; DIM]; prompt_len];
        let mut loss = 0.0;
        let mut sent_start = 0usize;

        for i in 0..ids.len() {
            let ctx = m.context_at(&ids, sent_start, i);
            let raw = m.forward(&ctx).1;
            let q = m.calibrated_prob(&raw, ids[i]);
            if i < prompt_len {
                logprob2.push(q.log2());
            } else {
                loss -= q.log2();
                // Every context member shares the context-vector gradient
                // equally; convert from nats to bits. The unseen-share
                // factor is constant in the embeddings, so it drops out.
                let gc = m.context_grad(&raw, ids[i]);
                let w = 1.0 / (ctx.len() as f64 * LN2);
                for j in sent_start..i.min(prompt_len) {
                    for k in 0..DIM {
                        grads[j][k] += w * gc[k];
                    }
                }
            }
            if m.is_boundary(ids[i]) {
                sent_start = i + 1;
            }
        }

        let trace = CausalTrace {
            tokens,
            logprob2,
            grads,
            loss,
            temperature: 1.0,
        };
        trace.validate()?;
        Ok(trace)
    }

    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        let m = &self.model;
        let tokens = self.tokenize(text);
        if tokens.is_empty() {
            return Err(Error::InvalidInput("cannot score empty text".into()));
        }
        let ids: Vec<usize> = tokens.iter().map(|t| m.vocab.id(&t.surface)).collect();
        let mut out = Vec::with_capacity(tokens.len());
        let mut sent_start = 0usize;
        for i in 0..ids.len() {
            let ctx = m.context_at(&ids, sent_start, i);
            let raw = m.forward(&ctx).1;
            out.push(m.calibrated_prob(&raw, ids[i]).log2());
            if m.is_boundary(ids[i]) {
                sent_start = i + 1;
            }
        }
        Ok(out)
    }

    fn greedy_decode(&self, text: &str, max_tokens: usize) -> Result<String> {
        let m = &self.model;
        let tokens = self.tokenize(text);
        if tokens.is_empty() {
            return Err(Error::InvalidInput("cannot decode from empty text".into()));
        }
        let mut ids: Vec<usize> = tokens.iter().map(|t| m.vocab.id(&t.surface)).collect();
        let mut sent_start = 0usize;
        for (i, id) in ids.iter().enumerate() {
            if m.is_boundary(*id) {
                sent_start = i + 1;
            }
        }
        let mut words = Vec::new();
        for _ in 0..max_tokens.max(1) {
            let ctx = m.context_at(&ids, sent_start, ids.len());
            let probs = m.predict(&ctx);
            let mut best = None::<(usize, f64)>;
            for (j, &p) in probs.iter().enumerate().skip(SPECIALS) {
                if best.map(|(_, bp)| p > bp).unwrap_or(true) {
                    best = Some((j, p));
                }
            }
            let eos_p = probs[EOS];
            let (id, p) = best.expect("non-empty vocab");
            if !words.is_empty() && eos_p > p {
                break;
            }
            if m.is_boundary(id) {
                sent_start = ids.len() + 1;
            }
            ids.push(id);
            words.push(m.vocab.words[id].clone());
        }
        Ok(words.join(" "))
    }
}

/// Masked tiny model backend.
pub struct TinyMaskedLm {
    model: Arc<CbowModel>,
}

impl TinyMaskedLm {
    pub fn shared() -> TinyMaskedLm {
        TinyMaskedLm {
            model: Arc::clone(&TINY_MASKED),
        }
    }
}

impl MaskedLm for TinyMaskedLm {
    fn mask_predict(&self, text: &str, top_k: usize) -> Result<MaskCandidates> {
        let m = &self.model;
        let pos = find_single_mask(text, MASK_TOKEN)?;
        // Context is the rest of the mask's own sentence, matching the
        // per-line contexts the model trained on; degenerate sentences
        // fall back to the whole text.
        let before_all = &text[..pos];
        let after_all = &text[pos + MASK_TOKEN.len()..];
        let before = match before_all.rfind(['.', '!', '?']) {
            Some(b) => &before_all[b + 1..],
            None => before_all,
        };
        let after = match after_all.find(['.', '!', '?']) {
            Some(b) => &after_all[..b],
            None => after_all,
        };
        let context_ids = |before: &str, after: &str| -> Vec<usize> {
            lexer::lex(before)
                .iter()
                .chain(lexer::lex(after).iter())
                .map(|t| m.vocab.id(&t.surface))
                .collect()
        };
        let mut ctx = context_ids(before, after);
        if ctx.is_empty() {
            ctx = context_ids(before_all, after_all);
        }
        if ctx.is_empty() {
            return Err(Error::InvalidInput("masked text has no context words".into()));
        }
        let probs = m.predict(&ctx);
        // This backend proposes words only, never punctuation.
        let mut ranked: Vec<(String, f64)> = probs
            .iter()
            .enumerate()
            .skip(SPECIALS)
            .filter(|(j, _)| {
                m.vocab.words[*j]
                    .chars()
                    .any(char::is_alphanumeric)
            })
            .map(|(j, &p)| (m.vocab.words[j].clone(), p))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(top_k.max(1));
        let out = MaskCandidates { candidates: ranked };
        out.validate()?;
        Ok(out)
    }
}
