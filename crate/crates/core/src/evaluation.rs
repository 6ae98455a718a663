//! Evaluation harness: privacy insertion, hiding-rate, perplexity,
//! name precision/recall, and multiple-choice accuracy.
//!
//! Datasets ship desensitized, so evaluation first inserts synthetic
//! privacy sentences (randomized wording and position, seeded) and
//! records exact value spans in a manifest. The privacy hiding rate
//! then counts an item as hidden when every component word of every
//! recorded surface was replaced; attributes whose risk is semantic
//! (occupation, sexual orientation, race) additionally require the
//! replacement to be dissimilar to the original.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::CausalLm;
use crate::config::{derive_seed, RunConfig};
use crate::error::{Error, Result};
use crate::lexer;
use crate::segmentation::Prompt;
use crate::similarity::{similarity, SYNONYM_THRESHOLD};
use crate::substitution::AnonymizedPair;

/// Attribute classes that evaluation datasets insert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyAttribute {
    Name,
    Occupation,
    SexualOrientation,
    Age,
    Race,
    Location,
    Date,
    Username,
    Password,
    CorporateName,
    SystemConfiguration,
}

impl PrivacyAttribute {
    /// Attributes that leak through near-synonyms even when the
    /// surface changes.
    pub fn semantic_rule(self) -> bool {
        matches!(
            self,
            PrivacyAttribute::Occupation
                | PrivacyAttribute::SexualOrientation
                | PrivacyAttribute::Race
        )
    }

    pub fn parse(name: &str) -> Result<PrivacyAttribute> {
        serde_json::from_value(serde_json::Value::String(name.to_string()))
            .map_err(|_| Error::Config(format!("unknown privacy attribute: {name}")))
    }

    pub fn label(&self) -> String {
        serde_json::to_value(self)
            .expect("attribute serializes")
            .as_str()
            .expect("string form")
            .to_string()
    }
}

/// Role of a name in the dual-name evaluation setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NameRole {
    /// Inserted, answer-irrelevant: should be anonymized (positive).
    Transcriber,
    /// Part of the original task content: should survive (negative).
    Interlocutor,
}

/// One recorded surface of a privacy item, with its byte span in the
/// augmented prompt text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacySurface {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// One inserted (or annotated) privacy item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyItem {
    pub prompt_id: String,
    pub attribute: PrivacyAttribute,
    pub surfaces: Vec<PrivacySurface>,
    pub semantic_rule: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<NameRole>,
}

/// Sentence patterns and value pool for one attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeTemplates {
    /// Sentence patterns, each containing exactly one `{}` slot.
    pub patterns: Vec<String>,
    pub values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<NameRole>,
}

/// Marks surfaces already present in the original prompts as manifest
/// items (e.g. interlocutor names in conversation transcripts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExistingAnnotation {
    pub attribute: String,
    pub surfaces: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<NameRole>,
}

/// Privacy-insertion template file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateFile {
    pub attributes: BTreeMap<String, AttributeTemplates>,
    #[serde(default)]
    pub annotate_existing: Vec<ExistingAnnotation>,
}

const INSERT_SALT: u64 = 0x1235_4321;

/// Sentence-boundary byte positions where an insertion may start.
fn insertion_points(text: &str) -> Vec<usize> {
    let mut points = vec![0];
    let bytes = text.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?') {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            if j < bytes.len() {
                points.push(j);
            }
        }
    }
    points.push(text.len());
    points.dedup();
    points
}

/// Insert randomized privacy sentences into each prompt and record
/// exact value spans. Deterministic for a fixed seed.
pub fn insert_privacy(
    prompts: &[Prompt],
    templates: &TemplateFile,
    seed: u64,
) -> Result<(Vec<Prompt>, Vec<PrivacyItem>)> {
    // Validate attributes and patterns up front.
    let mut parsed: Vec<(PrivacyAttribute, &AttributeTemplates)> = Vec::new();
    for (name, t) in &templates.attributes {
        let attribute = PrivacyAttribute::parse(name)?;
        if t.patterns.is_empty() || t.values.is_empty() {
            return Err(Error::Config(format!(
                "attribute {name} needs at least one pattern and one value"
            )));
        }
        for p in &t.patterns {
            if p.matches("{}").count() != 1 {
                return Err(Error::Config(format!(
                    "pattern {p:?} must contain exactly one {{}} slot"
                )));
            }
        }
        parsed.push((attribute, t));
    }
    for annotation in &templates.annotate_existing {
        PrivacyAttribute::parse(&annotation.attribute)?;
    }

    let mut augmented = Vec::with_capacity(prompts.len());
    let mut manifest = Vec::new();

    for prompt in prompts {
        prompt.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ INSERT_SALT, &prompt.id));
        let mut text = prompt.text.clone();
        // (attribute, role, value, span) for items inserted so far
        let mut placed: Vec<(PrivacyAttribute, Option<NameRole>, String, usize, usize)> = Vec::new();

        for (attribute, t) in &parsed {
            let pattern = &t.patterns[rng.gen_range(0..t.patterns.len())];
            let value = &t.values[rng.gen_range(0..t.values.len())];
            let slot = pattern.find("{}").expect("validated");
            let sentence = pattern.replacen("{}", value, 1);

            let points = insertion_points(&text);
            let at = points[rng.gen_range(0..points.len())];

            // Splice with single-space joins on both sides.
            let mut inserted = String::new();
            let before = &text[..at];
            let after = &text[at..];
            inserted.push_str(before);
            if !before.is_empty() && !before.ends_with(' ') {
                inserted.push(' ');
            }
            let value_start = inserted.len() + slot;
            inserted.push_str(&sentence);
            if !after.is_empty() && !after.starts_with(' ') {
                inserted.push(' ');
            }
            inserted.push_str(after);

            let grew = inserted.len() - text.len();
            for (_, _, _, s, e) in placed.iter_mut() {
                if *s >= at {
                    *s += grew;
                    *e += grew;
                }
            }
            placed.push((
                *attribute,
                t.role,
                value.clone(),
                value_start,
                value_start + value.len(),
            ));
            text = inserted;
        }

        for (attribute, role, value, s, e) in placed {
            debug_assert_eq!(&text[s..e], value);
            manifest.push(PrivacyItem {
                prompt_id: prompt.id.clone(),
                attribute,
                semantic_rule: attribute.semantic_rule(),
                role,
                surfaces: vec![PrivacySurface {
                    text: value,
                    char_start: s,
                    char_end: e,
                }],
            });
        }

        for annotation in &templates.annotate_existing {
            let attribute = PrivacyAttribute::parse(&annotation.attribute)?;
            for surface in &annotation.surfaces {
                let spans: Vec<PrivacySurface> = text
                    .match_indices(surface.as_str())
                    .filter(|(start, _)| {
                        let before_ok = *start == 0
                            || !text[..*start].chars().next_back().unwrap().is_alphanumeric();
                        let end = start + surface.len();
                        let after_ok = end == text.len()
                            || !text[end..].chars().next().unwrap().is_alphanumeric();
                        before_ok && after_ok
                    })
                    .map(|(start, m)| PrivacySurface {
                        text: m.to_string(),
                        char_start: start,
                        char_end: start + m.len(),
                    })
                    .collect();
                if !spans.is_empty() {
                    manifest.push(PrivacyItem {
                        prompt_id: prompt.id.clone(),
                        attribute,
                        semantic_rule: attribute.semantic_rule(),
                        role: annotation.role,
                        surfaces: spans,
                    });
                }
            }
        }

        augmented.push(Prompt {
            text,
            ..prompt.clone()
        });
    }

    Ok((augmented, manifest))
}

/// Per-attribute hiding statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrStats {
    pub hidden: usize,
    pub total: usize,
    pub rate: f64,
}

/// Privacy hiding rate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhrReport {
    pub per_attribute: BTreeMap<String, AttrStats>,
    pub overall: f64,
    pub n_total: usize,
    pub n_hidden: usize,
}

fn pair_index(pairs: &[AnonymizedPair]) -> BTreeMap<&str, &AnonymizedPair> {
    pairs.iter().map(|p| (p.prompt_id.as_str(), p)).collect()
}

/// Whether every component word of every surface was replaced (and,
/// under the semantic rule, replaced dissimilarly).
fn item_hidden(item: &PrivacyItem, pair: &AnonymizedPair, semantic: bool) -> Result<bool> {
    for surface in &item.surfaces {
        let span_text = pair
            .original_text
            .get(surface.char_start..surface.char_end)
            .ok_or_else(|| {
                Error::Data(format!(
                    "manifest span {}..{} out of bounds for prompt {}",
                    surface.char_start, surface.char_end, item.prompt_id
                ))
            })?;
        if span_text != surface.text {
            return Err(Error::Data(format!(
                "manifest span mismatch for prompt {}: expected {:?}, found {:?}",
                item.prompt_id, surface.text, span_text
            )));
        }
        for part in lexer::lex(&surface.text) {
            let ps = surface.char_start + part.char_start;
            let pe = surface.char_start + part.char_end;
            let replacement = pair
                .replacements
                .iter()
                .find(|r| r.char_start < pe && ps < r.char_end);
            match replacement {
                None => return Ok(false), // word survived: leaked
                Some(r) => {
                    // A replacement equal to the original by coincidence
                    // still leaks.
                    if r.chosen_surface.to_lowercase() == part.surface.to_lowercase() {
                        return Ok(false);
                    }
                    if semantic
                        && similarity(&part.surface, &r.chosen_surface) >= SYNONYM_THRESHOLD
                    {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Privacy hiding rate over a manifest and its anonymized pairs.
pub fn phr(items: &[PrivacyItem], pairs: &[AnonymizedPair]) -> Result<PhrReport> {
    let index = pair_index(pairs);
    let mut per_attribute: BTreeMap<String, AttrStats> = BTreeMap::new();
    let mut n_total = 0;
    let mut n_hidden = 0;
    for item in items {
        let pair = index.get(item.prompt_id.as_str()).ok_or_else(|| {
            Error::Data(format!("manifest references unknown prompt id {}", item.prompt_id))
        })?;
        let hidden = item_hidden(item, pair, item.semantic_rule)?;
        let stats = per_attribute.entry(item.attribute.label()).or_insert(AttrStats {
            hidden: 0,
            total: 0,
            rate: 0.0,
        });
        stats.total += 1;
        n_total += 1;
        if hidden {
            stats.hidden += 1;
            n_hidden += 1;
        }
    }
    for stats in per_attribute.values_mut() {
        stats.rate = stats.hidden as f64 / stats.total as f64;
    }
    let overall = if n_total == 0 {
        0.0
    } else {
        n_hidden as f64 / n_total as f64
    };
    Ok(PhrReport {
        per_attribute,
        overall,
        n_total,
        n_hidden,
    })
}

/// Precision/recall/F1 over transcriber (positive) vs interlocutor
/// (negative) names; a name is flagged when fully replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Set when nothing was flagged, making precision 0 by convention.
    pub degenerate_precision: bool,
}

pub fn name_prf(items: &[PrivacyItem], pairs: &[AnonymizedPair]) -> Result<PrfReport> {
    let index = pair_index(pairs);
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for item in items {
        if item.attribute != PrivacyAttribute::Name {
            continue;
        }
        let Some(role) = item.role else { continue };
        let pair = index.get(item.prompt_id.as_str()).ok_or_else(|| {
            Error::Data(format!("manifest references unknown prompt id {}", item.prompt_id))
        })?;
        // The surface-change test alone decides "flagged"; the semantic
        // rule does not apply to names.
        let flagged = item_hidden(item, pair, false)?;
        match (role, flagged) {
            (NameRole::Transcriber, true) => tp += 1,
            (NameRole::Transcriber, false) => fn_ += 1,
            (NameRole::Interlocutor, true) => fp += 1,
            (NameRole::Interlocutor, false) => {}
        }
    }
    let degenerate_precision = tp + fp == 0;
    let precision = if degenerate_precision {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PrfReport {
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        degenerate_precision,
    })
}

/// Perplexity of a text under a causal backend: `2^(-mean logprob2)`.
pub fn perplexity(text: &str, backend: &dyn CausalLm) -> Result<f64> {
    if text.is_empty() {
        return Err(Error::InvalidInput("cannot compute perplexity of empty text".into()));
    }
    let logprobs = backend.token_logprobs(text)?;
    if logprobs.is_empty() {
        return Err(Error::InvalidInput("text produced no tokens".into()));
    }
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok((-mean).exp2())
}

/// Mean/median perplexity over a set of texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityStats {
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

pub fn perplexity_stats(texts: &[&str], backend: &dyn CausalLm) -> Result<PerplexityStats> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("no texts to score".into()));
    }
    let mut values = Vec::with_capacity(texts.len());
    for t in texts {
        values.push(perplexity(t, backend)?);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };
    Ok(PerplexityStats {
        mean,
        median,
        count: values.len(),
    })
}

/// One answered multiple-choice question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub id: String,
    pub gold: String,
    pub pred: String,
}

fn answer_letter(s: &str) -> Option<char> {
    s.chars()
        .find(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_uppercase())
}

/// Exact-match letter accuracy.
pub fn mcq_accuracy(answers: &[AnswerRecord]) -> f64 {
    if answers.is_empty() {
        return 0.0;
    }
    let correct = answers
        .iter()
        .filter(|a| {
            matches!((answer_letter(&a.gold), answer_letter(&a.pred)), (Some(g), Some(p)) if g == p)
        })
        .count();
    correct as f64 / answers.len() as f64
}

/// Full evaluation report with the config snapshot it was produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub phr: PhrReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<PerplexityStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_prf: Option<PrfReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Scores from external evaluator commands (reference-based task
    /// metrics live outside this tree; see [`external_metric`]).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub external: BTreeMap<String, f64>,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
}

/// Run an external evaluator command: the pairs are piped to its stdin
/// as JSONL and it must print a single float score to stdout. This is
/// the adapter surface for reference-based task metrics whose tooling
/// is dataset-specific.
pub fn external_metric(command: &str, pairs: &[AnonymizedPair]) -> Result<f64> {
    use std::io::Write;
    use std::process::{Command, Stdio};

    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Backend(format!("cannot spawn evaluator {command:?}: {e}")))?;
    {
        let stdin = child.stdin.as_mut().expect("piped stdin");
        'feed: for pair in pairs {
            let mut line = serde_json::to_vec(pair)?;
            line.push(b'\n');
            match stdin.write_all(&line) {
                Ok(()) => {}
                // The evaluator may legitimately not read its input.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => break 'feed,
                Err(e) => return Err(e.into()),
            }
        }
    }
    let output = child
        .wait_with_output()
        .map_err(|e| Error::Backend(format!("evaluator {command:?} failed: {e}")))?;
    if !output.status.success() {
        return Err(Error::Backend(format!(
            "evaluator {command:?} exited with {}",
            output.status
        )));
    }
    let text = String::from_utf8_lossy(&output.stdout);
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::Data(format!("evaluator {command:?} printed {:?}, expected a float", text.trim())))
}
