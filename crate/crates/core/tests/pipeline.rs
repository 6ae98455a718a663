//! Integration tests over the assembled pipeline: corpus generation,
//! its failure handling, and the fluency direction of anonymized text.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use promptmask_core::backends::tiny::TinyCausalLm;
use promptmask_core::config::RunConfig;
use promptmask_core::distillation::{generate_pairs, Split};
use promptmask_core::error::Error;
use promptmask_core::evaluation::perplexity;
use promptmask_core::segmentation::{Prompt, TaskKind};

fn stub_prompts(n: usize) -> Vec<Prompt> {
    let texts = [
        "Milo has a severe fever today.",
        "The engineer fixed the server for Tara.",
        "Nova visited Paris with the team.",
    ];
    (0..n)
        .map(|i| Prompt {
            id: format!("g{i:03}"),
            text: texts[i % texts.len()].to_string(),
            task_kind: TaskKind::Generic,
            reference_output: Some("noted".into()),
        })
        .collect()
}

fn stub_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seed = 17;
    cfg.lambda = 0.6;
    cfg
}

#[test]
fn corpus_targets_reconstruct_from_sidecar_records() {
    let prompts = stub_prompts(12);
    let (corpus, sidecar, report) = generate_pairs(&prompts, &stub_config()).unwrap();
    assert_eq!(report.failed, 0);
    assert_eq!(corpus.pairs.len(), sidecar.len());
    for (pair, record) in corpus.pairs.iter().zip(&sidecar) {
        assert_eq!(pair.prompt_id, record.prompt_id);
        assert_eq!(pair.source, record.original_text);
        assert_eq!(pair.target, record.anonymized_text);
        assert_eq!(record.reconstruct(), pair.target, "sidecar records rebuild the target");
    }
    assert_eq!(corpus.generation_config_hash, stub_config().hash());
}

#[test]
fn corpus_split_is_deterministic_by_id() {
    let prompts = stub_prompts(40);
    let (a, _, _) = generate_pairs(&prompts, &stub_config()).unwrap();
    let (b, _, _) = generate_pairs(&prompts, &stub_config()).unwrap();
    let splits: Vec<Split> = a.pairs.iter().map(|p| p.split).collect();
    let splits_b: Vec<Split> = b.pairs.iter().map(|p| p.split).collect();
    assert_eq!(splits, splits_b);
}

#[test]
fn duplicate_prompt_ids_are_rejected() {
    let mut prompts = stub_prompts(3);
    prompts[2].id = prompts[0].id.clone();
    assert!(matches!(
        generate_pairs(&prompts, &stub_config()),
        Err(Error::Data(_))
    ));
}

#[test]
fn empty_dataset_yields_empty_corpus() {
    let (corpus, sidecar, report) = generate_pairs(&[], &stub_config()).unwrap();
    assert!(corpus.pairs.is_empty());
    assert!(sidecar.is_empty());
    assert_eq!(report.generated + report.failed, 0);
}

#[test]
fn high_failure_rate_aborts_generation() {
    // A stub with a two-token context window fails every prompt.
    let dir = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "causal": {
            "mode": "table",
            "context_window": 2,
            "tokens": {},
            "default": { "prob": 0.5, "grad": [1.0] },
            "default_decode": "x"
        },
        "masked": { "default": [["alt", 1.0]] }
    });
    let path = dir.path().join("narrow.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    let mut cfg = stub_config();
    cfg.causal_model = format!("stub:{}", path.display());
    cfg.masked_model = format!("stub:{}", path.display());

    let err = generate_pairs(&stub_prompts(10), &cfg).unwrap_err();
    match err {
        Error::Data(msg) => assert!(msg.contains("aborting"), "got: {msg}"),
        other => panic!("expected Data error, got {other:?}"),
    }
}

#[test]
fn rare_failures_are_skipped_and_reported() {
    let mut prompts = stub_prompts(25);
    // one prompt blows past the 512-token stub context window
    prompts[7].text = "word ".repeat(600).trim().to_string();
    let (corpus, _, report) = generate_pairs(&prompts, &stub_config()).unwrap();
    assert_eq!(report.failed, 1);
    assert_eq!(report.generated, 24);
    assert_eq!(corpus.pairs.len(), 24);
    assert_eq!(report.failures[0].0, "g007");
}

#[test]
fn fluent_text_scores_lower_perplexity_than_shuffled() {
    let sentences = [
        "the cat sat on the mat .",
        "the doctor examines the patient in the clinic .",
        "the train arrives at the station at noon .",
        "the farmer feeds the animals every morning .",
        "the report covers the results of the last quarter .",
        "the meeting starts at nine in the morning .",
        "the program reads the input and writes the output .",
        "the letter arrived on monday morning .",
    ];
    let lm = TinyCausalLm::shared();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut fluent = Vec::new();
    let mut shuffled = Vec::new();
    for s in &sentences {
        fluent.push(perplexity(s, &lm).unwrap());
        let mut words: Vec<&str> = s.split_whitespace().collect();
        words.shuffle(&mut rng);
        shuffled.push(perplexity(&words.join(" "), &lm).unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mf = mean(&fluent);
    let ms = mean(&shuffled);
    assert!(
        mf < ms,
        "fluent perplexity {mf:.2} should be below shuffled {ms:.2}"
    );
}

#[test]
fn anonymized_output_stays_fluent_under_the_small_model() {
    // Sanitizing with the small models keeps perplexity well below a
    // word-scrambled rendition of the same sentence.
    let mut cfg = RunConfig::default();
    cfg.causal_model = "tiny:causal".into();
    cfg.masked_model = "tiny:masked".into();
    cfg.seq2seq_model = String::new();
    cfg.seed = 5;
    let prompts: Vec<Prompt> = [
        "the patient reports a fever and pain in the chest.",
        "the team discussed the plan for the next week.",
        "the doctor gives the patient a new medication.",
        "the letter arrived on monday morning.",
        "the program reads the input and writes the output.",
        "the farmer feeds the animals every morning.",
    ]
    .iter()
    .enumerate()
    .map(|(i, t)| Prompt {
        id: format!("flu{i}"),
        text: t.to_string(),
        task_kind: TaskKind::Generic,
        reference_output: Some("noted".into()),
    })
    .collect();

    let results = promptmask_core::pipeline::sanitize_all(&prompts, &cfg).unwrap();
    let lm = TinyCausalLm::shared();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut anonymized_ppl = Vec::new();
    let mut scrambled_ppl = Vec::new();
    for result in results {
        let pair = result.unwrap();
        anonymized_ppl.push(perplexity(&pair.anonymized_text, &lm).unwrap());
        let mut words: Vec<&str> = pair.anonymized_text.split_whitespace().collect();
        words.shuffle(&mut rng);
        scrambled_ppl.push(perplexity(&words.join(" "), &lm).unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&anonymized_ppl) < mean(&scrambled_ppl),
        "anonymized {:.2} vs scrambled {:.2}",
        mean(&anonymized_ppl),
        mean(&scrambled_ppl)
    );
}

#[test]
fn segmentation_matches_committed_golden_file() {
    let fixtures = [
        "Jack is happy.",
        "A 42-year-old man named David lives in New York City.",
        "Set max_retries to 3 for the httpClient.",
    ];
    let kinds = [TaskKind::Generic, TaskKind::Generic, TaskKind::Codegen];
    let policy = promptmask_core::segmentation::PosPolicy::default();
    let mut actual = BTreeMap::new();
    for (text, kind) in fixtures.iter().zip(kinds) {
        let words = promptmask_core::segmentation::segment(text, &policy, kind).unwrap();
        actual.insert(text.to_string(), words);
    }
    let actual_json = serde_json::to_value(&actual).unwrap();
    let golden_raw = include_str!("golden/segmentation.json");
    let golden: serde_json::Value = serde_json::from_str(golden_raw).unwrap();
    assert_eq!(
        actual_json, golden,
        "tagger output drifted from the committed golden file"
    );
}
