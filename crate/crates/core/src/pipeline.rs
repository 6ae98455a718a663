//! Cross-prompt orchestration.
//!
//! Prompts parallelize across a worker pool; each worker builds its
//! own backend instances from the config, so no backend is shared
//! between threads. Per-prompt RNG seeds derive from the global seed
//! and the prompt id, so results are byte-identical regardless of
//! worker count or scheduling.

use std::thread;

use crate::backends::{causal_backend, masked_backend, seq2seq_backend, BackendSet};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::segmentation::Prompt;
use crate::substitution::{sanitize_prompt, AnonymizedPair};

/// Build one worker's backend set from the config ids.
pub fn backend_set(cfg: &RunConfig) -> Result<BackendSet> {
    Ok(BackendSet {
        causal: causal_backend(&cfg.causal_model)?,
        masked: masked_backend(&cfg.masked_model)?,
        seq2seq: if cfg.seq2seq_model.is_empty() {
            None
        } else {
            Some(seq2seq_backend(&cfg.seq2seq_model)?)
        },
    })
}

/// Sanitize a dataset, returning per-prompt results in input order.
pub fn sanitize_all(prompts: &[Prompt], cfg: &RunConfig) -> Result<Vec<Result<AnonymizedPair>>> {
    cfg.validate()?;
    let workers = cfg.workers.max(1).min(prompts.len().max(1));
    if workers <= 1 {
        let backends = backend_set(cfg)?;
        return Ok(prompts
            .iter()
            .map(|p| sanitize_prompt(p, cfg, &backends))
            .collect());
    }

    let mut collected: Vec<Vec<(usize, Result<AnonymizedPair>)>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    let backends = match backend_set(cfg) {
                        Ok(b) => b,
                        Err(e) => {
                            let msg = e.to_string();
                            for i in (w..prompts.len()).step_by(workers) {
                                out.push((i, Err(Error::Config(msg.clone()))));
                            }
                            return out;
                        }
                    };
                    for i in (w..prompts.len()).step_by(workers) {
                        out.push((i, sanitize_prompt(&prompts[i], cfg, &backends)));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut slots: Vec<Option<Result<AnonymizedPair>>> = (0..prompts.len()).map(|_| None).collect();
    for chunk in collected.drain(..) {
        for (i, r) in chunk {
            slots[i] = Some(r);
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("all indices filled")).collect())
}

/// The low-resource path: rewrite with the sequence-to-sequence
/// backend only. Scoring backends in the set are never touched.
pub fn lightweight_anonymize(set: &BackendSet, text: &str) -> Result<String> {
    let seq2seq = set
        .seq2seq
        .as_ref()
        .ok_or_else(|| Error::Config("no seq2seq backend configured".into()))?;
    seq2seq.generate(text)
}
