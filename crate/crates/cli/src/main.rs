//! Unified command-line entry point for the sanitization pipeline.
//!
//! Subcommands read and write JSONL (one record per line) and CSV.
//! Every artifact embeds the config snapshot, its hash, and the seed,
//! so `report` can reconstruct the exact invocation. Errors print a
//! machine-readable JSON record to stderr and exit with a per-kind
//! status code.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use promptmask_core::backends::causal_backend;
use promptmask_core::config::{Ablation, RunConfig};
use promptmask_core::distillation::{
    generate_pairs, train_anonymizer, AnonymizerArtifact, CorpusPair, DistillConfig, PairCorpus,
    TrainLogEntry,
};
use promptmask_core::error::{Error, Result};
use promptmask_core::evaluation::{
    external_metric, insert_privacy, mcq_accuracy, name_prf, perplexity_stats, phr, AnswerRecord,
    EvalReport, PrivacyItem, TemplateFile,
};
use promptmask_core::io::{read_jsonl, read_prompts, write_jsonl};
use promptmask_core::pipeline::{backend_set, sanitize_all};
use promptmask_core::scoring;
use promptmask_core::segmentation::{align, segment, WordSpan};
use promptmask_core::substitution::AnonymizedPair;

#[derive(Debug, Parser)]
#[command(name = "promptmask", version, about = "Context-aware prompt sanitization")]
struct Cli {
    /// Declarative config file (JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Force hermetic stub backends (CI mode).
    #[arg(long, global = true)]
    stub: bool,

    /// Stub spec path used with --stub (defaults to the embedded table).
    #[arg(long, global = true)]
    stub_table: Option<PathBuf>,

    #[arg(long, global = true)]
    causal_model: Option<String>,

    #[arg(long, global = true)]
    masked_model: Option<String>,

    #[arg(long, global = true)]
    seq2seq_model: Option<String>,

    /// Scaling factor for the adaptive protection ratio, in (0, 1].
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Cumulative-probability cutoff for the candidate set, in (0, 1].
    #[arg(long, global = true)]
    tau: Option<f64>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_parser = parse_ablation)]
    ablation: Option<Ablation>,

    /// Protection ratio override for the fixed-ratio ablation.
    #[arg(long, global = true)]
    fixed_gamma: Option<f64>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

fn parse_ablation(s: &str) -> std::result::Result<Ablation, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown ablation mode: {s} (expected none, fixed-ratio, random-select, raw-prob)"))
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment prompts into tagged words.
    Segment(InOut),
    /// Emit per-word score CSV for external analysis.
    Score(InOut),
    /// Anonymize prompts with the full scoring pipeline.
    Sanitize(InOut),
    /// Insert synthetic privacy sentences and write the span manifest.
    InsertPrivacy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Generate a <original, anonymized> training corpus plus sidecar.
    GenDataset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
    },
    /// Train the lightweight anonymizer on a pair corpus.
    Distill {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        weight_decay: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        base_model: Option<String>,
    },
    /// Anonymize prompts with a distilled model (no scoring backends).
    Anonymize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compute hiding rate and usability metrics from a manifest and pairs.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Also score anonymized-text perplexity with the causal backend.
        #[arg(long)]
        with_perplexity: bool,
        /// External evaluator as NAME=COMMAND; pairs go to its stdin as
        /// JSONL and it must print one float. Repeatable.
        #[arg(long = "external-metric")]
        external_metrics: Vec<String>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-emit the per-attribute CSV and invocation info from a report.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Debug, Args)]
struct InOut {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        let record = serde_json::json!({
            "error": err.kind(),
            "message": err.to_string(),
        });
        eprintln!("{record}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        "io" => 3,
        "data" | "invalid_input" | "json" => 4,
        "backend" | "length" => 5,
        "config" => 6,
        "alignment" => 7,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let raw = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&raw)
                .map_err(|e| Error::Config(format!("malformed config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if cli.stub || cli.stub_table.is_some() {
        let table = cli
            .stub_table
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "default".to_string());
        cfg.causal_model = format!("stub:{table}");
        cfg.masked_model = format!("stub:{table}");
        cfg.seq2seq_model = "stub:echo".to_string();
    }
    if let Some(v) = &cli.causal_model {
        cfg.causal_model = v.clone();
    }
    if let Some(v) = &cli.masked_model {
        cfg.masked_model = v.clone();
    }
    if let Some(v) = &cli.seq2seq_model {
        cfg.seq2seq_model = v.clone();
    }
    if let Some(v) = cli.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = cli.tau {
        cfg.tau = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.ablation {
        cfg.ablation = v;
    }
    if let Some(v) = cli.fixed_gamma {
        cfg.fixed_gamma = Some(v);
    }
    if let Some(v) = cli.workers {
        cfg.workers = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Segment(io) => cmd_segment(&cfg, io),
        Command::Score(io) => cmd_score(&cfg, io),
        Command::Sanitize(io) => cmd_sanitize(&cfg, io),
        Command::InsertPrivacy {
            input,
            templates,
            output,
            manifest,
        } => cmd_insert_privacy(&cfg, input, templates, output, manifest),
        Command::GenDataset {
            input,
            corpus,
            sidecar,
        } => cmd_gen_dataset(&cfg, input, corpus, sidecar),
        Command::Distill {
            corpus,
            model,
            log,
            learning_rate,
            weight_decay,
            epochs,
            batch_size,
            base_model,
        } => {
            let mut dcfg = DistillConfig::default();
            dcfg.seed = cfg.seed;
            if let Some(v) = learning_rate {
                dcfg.learning_rate = *v;
            }
            if let Some(v) = weight_decay {
                dcfg.weight_decay = *v;
            }
            if let Some(v) = epochs {
                dcfg.epochs = *v;
            }
            if let Some(v) = batch_size {
                dcfg.batch_size = *v;
            }
            if let Some(v) = base_model {
                dcfg.base_model = v.clone();
            }
            cmd_distill(&dcfg, corpus, model, log)
        }
        Command::Anonymize {
            input,
            model,
            output,
        } => cmd_anonymize(input, model, output),
        Command::Evaluate {
            manifest,
            pairs,
            answers,
            with_perplexity,
            external_metrics,
            report,
            csv,
        } => cmd_evaluate(
            &cfg,
            manifest,
            pairs,
            answers.as_deref(),
            *with_perplexity,
            external_metrics,
            report,
            csv.as_deref(),
        ),
        Command::Report { report, csv } => cmd_report(report, csv),
    }
}

#[derive(Debug, Serialize)]
struct SegmentedPrompt<'a> {
    id: &'a str,
    words: Vec<WordSpan>,
}

fn cmd_segment(cfg: &RunConfig, io: &InOut) -> Result<()> {
    let prompts = read_prompts(&io.input)?;
    let policy = cfg.pos_policy()?;
    let mut records = Vec::with_capacity(prompts.len());
    for p in &prompts {
        let words = segment(&p.text, &policy, p.task_kind).map_err(|e| e.for_prompt(&p.id))?;
        records.push(SegmentedPrompt { id: &p.id, words });
    }
    write_jsonl(&io.output, &records)?;
    println!("segmented {} prompts into {}", prompts.len(), io.output.display());
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_score(cfg: &RunConfig, io: &InOut) -> Result<()> {
    let prompts = read_prompts(&io.input)?;
    let policy = cfg.pos_policy()?;
    let backends = backend_set(cfg)?;
    let mut out = String::from("prompt_id,word_index,word,pos,grad_norm,importance,self_info,privacy,entropy\n");
    for p in &prompts {
        let mut run = || -> Result<()> {
            let words = segment(&p.text, &policy, p.task_kind)?;
            let target = match &p.reference_output {
                Some(y) if !y.is_empty() => y.clone(),
                _ => backends.causal.greedy_decode(&p.text, 12)?,
            };
            let trace = backends.causal.causal_trace(p, &target)?;
            let alignment = align(&words, &trace.tokens)?;
            let scores = scoring::word_scores(&trace, &alignment)?;
            for w in &words {
                let pos = serde_json::to_value(w.pos_tag)?;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    csv_field(&p.id),
                    w.index,
                    csv_field(&w.surface),
                    pos.as_str().unwrap_or("X"),
                    scores.grad_norm[w.index],
                    scores.importance[w.index],
                    scores.self_info[w.index],
                    scores.privacy[w.index],
                    scores.entropy,
                ));
            }
            Ok(())
        };
        run().map_err(|e| e.for_prompt(&p.id))?;
    }
    fs::write(&io.output, out)?;
    println!("scored {} prompts into {}", prompts.len(), io.output.display());
    Ok(())
}

fn cmd_sanitize(cfg: &RunConfig, io: &InOut) -> Result<()> {
    let prompts = read_prompts(&io.input)?;
    let results = sanitize_all(&prompts, cfg)?;
    let mut pairs = Vec::with_capacity(results.len());
    for r in results {
        pairs.push(r?);
    }
    write_jsonl(&io.output, &pairs)?;
    println!("sanitized {} prompts into {}", pairs.len(), io.output.display());
    Ok(())
}

fn cmd_insert_privacy(
    cfg: &RunConfig,
    input: &PathBuf,
    templates: &PathBuf,
    output: &PathBuf,
    manifest_path: &PathBuf,
) -> Result<()> {
    let prompts = read_prompts(input)?;
    let raw = fs::read_to_string(templates)
        .map_err(|e| Error::Config(format!("cannot read templates {}: {e}", templates.display())))?;
    let templates: TemplateFile = serde_json::from_str(&raw)
        .map_err(|e| Error::Config(format!("malformed templates: {e}")))?;
    let (augmented, manifest) = insert_privacy(&prompts, &templates, cfg.seed)?;
    write_jsonl(output, &augmented)?;
    write_jsonl(manifest_path, &manifest)?;
    println!(
        "inserted privacy into {} prompts ({} manifest items)",
        augmented.len(),
        manifest.len()
    );
    Ok(())
}

fn cmd_gen_dataset(cfg: &RunConfig, input: &PathBuf, corpus: &PathBuf, sidecar: &PathBuf) -> Result<()> {
    let prompts = read_prompts(input)?;
    if prompts.is_empty() {
        eprintln!("warning: empty dataset, writing an empty corpus");
    }
    let (pair_corpus, sidecar_pairs, report) = generate_pairs(&prompts, cfg)?;
    write_jsonl(corpus, &pair_corpus.pairs)?;
    write_jsonl(sidecar, &sidecar_pairs)?;
    println!(
        "generated {} pairs ({} failed) into {}",
        report.generated,
        report.failed,
        corpus.display()
    );
    for (id, err) in &report.failures {
        eprintln!("skipped {id}: {err}");
    }
    Ok(())
}

fn cmd_distill(dcfg: &DistillConfig, corpus_path: &PathBuf, model: &PathBuf, log_path: &PathBuf) -> Result<()> {
    let pairs: Vec<CorpusPair> = read_jsonl(corpus_path)?;
    let corpus = PairCorpus {
        pairs,
        generation_config_hash: String::new(),
    };
    let outcome = train_anonymizer(&corpus, dcfg)?;
    outcome.artifact.save(model)?;
    write_jsonl::<TrainLogEntry>(log_path, &outcome.log)?;
    let vals: Vec<f64> = outcome
        .log
        .iter()
        .filter(|e| e.split == "val")
        .map(|e| e.loss)
        .collect();
    println!(
        "trained on {} pairs; val loss {:.4} -> {:.4}; model at {}",
        corpus.pairs.len(),
        vals.first().copied().unwrap_or(f64::NAN),
        vals.last().copied().unwrap_or(f64::NAN),
        model.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct LightweightOutput {
    id: String,
    original_text: String,
    anonymized_text: String,
}

fn cmd_anonymize(input: &PathBuf, model: &PathBuf, output: &PathBuf) -> Result<()> {
    let prompts = read_prompts(input)?;
    let artifact = AnonymizerArtifact::load(model)?;
    let mut records = Vec::with_capacity(prompts.len());
    for p in &prompts {
        let anonymized = artifact.anonymize(&p.text).map_err(|e| e.for_prompt(&p.id))?;
        records.push(LightweightOutput {
            id: p.id.clone(),
            original_text: p.text.clone(),
            anonymized_text: anonymized,
        });
    }
    write_jsonl(output, &records)?;
    println!("anonymized {} prompts into {}", records.len(), output.display());
    Ok(())
}

fn attribute_csv(report: &EvalReport) -> String {
    let mut out = String::from("attribute,hidden,total,rate\n");
    for (attribute, stats) in &report.phr.per_attribute {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(attribute),
            stats.hidden,
            stats.total,
            stats.rate
        ));
    }
    out.push_str(&format!(
        "overall,{},{},{}\n",
        report.phr.n_hidden, report.phr.n_total, report.phr.overall
    ));
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    cfg: &RunConfig,
    manifest_path: &PathBuf,
    pairs_path: &PathBuf,
    answers: Option<&std::path::Path>,
    with_perplexity: bool,
    external_metrics: &[String],
    report_path: &PathBuf,
    csv: Option<&std::path::Path>,
) -> Result<()> {
    let manifest: Vec<PrivacyItem> = read_jsonl(manifest_path)?;
    let pairs: Vec<AnonymizedPair> = read_jsonl(pairs_path)?;

    let phr_report = phr(&manifest, &pairs)?;
    let prf = if manifest.iter().any(|i| i.role.is_some()) {
        Some(name_prf(&manifest, &pairs)?)
    } else {
        None
    };
    let accuracy = match answers {
        Some(path) => {
            let records: Vec<AnswerRecord> = read_jsonl(path)?;
            Some(mcq_accuracy(&records))
        }
        None => None,
    };
    let perplexity = if with_perplexity {
        let backend = causal_backend(&cfg.causal_model)?;
        let texts: Vec<&str> = pairs.iter().map(|p| p.anonymized_text.as_str()).collect();
        Some(perplexity_stats(&texts, backend.as_ref())?)
    } else {
        None
    };
    let mut external = std::collections::BTreeMap::new();
    for spec in external_metrics {
        let (name, command) = spec.split_once('=').ok_or_else(|| {
            Error::Config(format!("--external-metric expects NAME=COMMAND, got {spec:?}"))
        })?;
        external.insert(name.to_string(), external_metric(command, &pairs)?);
    }

    let report = EvalReport {
        phr: phr_report,
        perplexity,
        name_prf: prf,
        accuracy,
        external,
        config: cfg.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };
    fs::write(report_path, serde_json::to_string_pretty(&report)?)?;
    if let Some(csv_path) = csv {
        fs::write(csv_path, attribute_csv(&report))?;
    }
    println!(
        "evaluated {} items over {} pairs: overall hiding rate {:.4}",
        report.phr.n_total,
        pairs.len(),
        report.phr.overall
    );
    Ok(())
}

fn cmd_report(report_path: &PathBuf, csv_path: &PathBuf) -> Result<()> {
    let raw = fs::read_to_string(report_path)?;
    let report: EvalReport = serde_json::from_str(&raw)
        .map_err(|e| Error::Data(format!("malformed report {}: {e}", report_path.display())))?;
    fs::write(csv_path, attribute_csv(&report))?;
    println!(
        "config_hash={} seed={} config={}",
        report.config_hash,
        report.seed,
        serde_json::to_string(&report.config)?
    );
    Ok(())
}
