//! Word segmentation, part-of-speech tagging, and word/token alignment.
//!
//! A "word" is a tagger token: the segmenter's lexemes are the unit
//! every downstream score and replacement operates on. Each word knows
//! its byte span in the prompt text, its coarse POS tag, and whether
//! the configured policy counts it as a content word.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::backends::BackendToken;
use crate::error::{Error, Result};
use crate::lexer;

pub mod tagger;

/// What kind of task a prompt drives; affects segmentation overlays only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Qa,
    Summarization,
    Codegen,
    #[default]
    Generic,
}

/// A prompt to sanitize, with an optional reference output used as the
/// loss target when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub task_kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_output: Option<String>,
}

impl Prompt {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Prompt {
            id: id.into(),
            text: text.into(),
            task_kind: TaskKind::Generic,
            reference_output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.is_empty() {
            return Err(Error::InvalidInput(format!(
                "prompt {}: text must be non-empty",
                self.id
            )));
        }
        Ok(())
    }
}

/// Coarse universal POS tags produced by the tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Propn,
    Num,
    Adj,
    Verb,
    Aux,
    Adv,
    Pron,
    Det,
    Adp,
    Cconj,
    Sconj,
    Part,
    Punct,
    Sym,
    X,
}

impl PosTag {
    pub fn parse(s: &str) -> Result<PosTag> {
        serde_json::from_value(serde_json::Value::String(s.to_uppercase()))
            .map_err(|_| Error::Config(format!("unknown POS tag: {s}")))
    }
}

/// Which POS tags count as replaceable content words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosPolicy {
    content: BTreeSet<PosTag>,
}

impl Default for PosPolicy {
    fn default() -> Self {
        PosPolicy {
            content: [PosTag::Noun, PosTag::Propn, PosTag::Num, PosTag::Adj]
                .into_iter()
                .collect(),
        }
    }
}

impl PosPolicy {
    pub fn new(tags: impl IntoIterator<Item = PosTag>) -> Self {
        PosPolicy {
            content: tags.into_iter().collect(),
        }
    }

    pub fn from_names(names: &[String]) -> Result<Self> {
        let mut content = BTreeSet::new();
        for n in names {
            content.insert(PosTag::parse(n)?);
        }
        Ok(PosPolicy { content })
    }

    pub fn is_content(&self, tag: PosTag) -> bool {
        self.content.contains(&tag)
    }
}

/// One word of a prompt: surface, byte span, tag, and content flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSpan {
    pub index: usize,
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
    pub pos_tag: PosTag,
    pub is_content: bool,
}

/// Segment text into tagged words.
///
/// Spans are ordered, non-overlapping, and never contain whitespace;
/// concatenating them with the original inter-span characters
/// reproduces the input exactly. For `TaskKind::Codegen`,
/// identifier-shaped tokens are forced to content tags since the
/// natural-language tagger is unreliable on code.
pub fn segment(text: &str, policy: &PosPolicy, task: TaskKind) -> Result<Vec<WordSpan>> {
    if text.is_empty() {
        return Err(Error::InvalidInput("cannot segment empty text".into()));
    }
    let lexemes = lexer::lex(text);
    let mut words = Vec::with_capacity(lexemes.len());
    let mut sentence_initial = true;
    for (index, lexeme) in lexemes.into_iter().enumerate() {
        let mut pos_tag = tagger::tag(&lexeme.surface, sentence_initial);
        if task == TaskKind::Codegen
            && pos_tag != PosTag::Num
            && tagger::looks_like_identifier(&lexeme.surface)
        {
            pos_tag = PosTag::Propn;
        }
        if pos_tag == PosTag::Punct {
            sentence_initial = matches!(lexeme.surface.as_str(), "." | "!" | "?");
        } else {
            sentence_initial = false;
        }
        words.push(WordSpan {
            index,
            surface: lexeme.surface,
            char_start: lexeme.char_start,
            char_end: lexeme.char_end,
            pos_tag,
            is_content: policy.is_content(pos_tag),
        });
    }
    Ok(words)
}

/// Maps each word index to a contiguous range of backend token indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenAlignment {
    ranges: Vec<Range<usize>>,
}

impl TokenAlignment {
    /// Token index range for a word. Panics if the word index is out of bounds.
    pub fn token_range(&self, word: usize) -> Range<usize> {
        self.ranges[word].clone()
    }

    pub fn word_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.ranges.iter().cloned()
    }
}

/// Align words to backend tokens by byte offsets.
///
/// Each word receives the minimal contiguous token range covering its
/// characters; a token's leading whitespace is ignored so that tokens
/// carrying a space prefix attach to the word they prefix. A token
/// intersecting two words is assigned to the earlier one. Errors if a
/// word ends up with no tokens or a non-special token belongs to no
/// word — both signal a tokenizer/segmenter mismatch.
pub fn align(words: &[WordSpan], tokens: &[BackendToken]) -> Result<TokenAlignment> {
    // Effective token spans with leading whitespace trimmed.
    let effective: Vec<Range<usize>> = tokens
        .iter()
        .map(|t| {
            let lead: usize = t
                .surface
                .chars()
                .take_while(|c| c.is_whitespace())
                .map(char::len_utf8)
                .sum();
            (t.char_start + lead)..t.char_end
        })
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; tokens.len()];
    for word in words {
        for (ti, span) in effective.iter().enumerate() {
            let overlaps = span.start < word.char_end && word.char_start < span.end;
            if overlaps && owner[ti].is_none() {
                owner[ti] = Some(word.index);
            }
        }
    }

    for (ti, token) in tokens.iter().enumerate() {
        if owner[ti].is_none() && !token.special {
            return Err(Error::Alignment(format!(
                "token {:?} at {}..{} is covered by no word",
                token.surface, token.char_start, token.char_end
            )));
        }
    }

    let mut ranges = Vec::with_capacity(words.len());
    for word in words {
        let mine: Vec<usize> = owner
            .iter()
            .enumerate()
            .filter_map(|(ti, o)| (*o == Some(word.index)).then_some(ti))
            .collect();
        let first = *mine.first().ok_or_else(|| {
            Error::Alignment(format!(
                "word {:?} at {}..{} is covered by no token",
                word.surface, word.char_start, word.char_end
            ))
        })?;
        let last = *mine.last().unwrap();
        if mine.len() != last - first + 1 {
            return Err(Error::Alignment(format!(
                "word {:?} maps to a non-contiguous token range",
                word.surface
            )));
        }
        ranges.push(first..last + 1);
    }
    Ok(TokenAlignment { ranges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token(surface: &str, start: usize, end: usize) -> BackendToken {
        BackendToken {
            surface: surface.to_string(),
            char_start: start,
            char_end: end,
            special: false,
        }
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(matches!(
            segment("", &PosPolicy::default(), TaskKind::Generic),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn single_number_is_content() {
        let words = segment("42", &PosPolicy::default(), TaskKind::Generic).unwrap();
        assert_eq!(words.len(), 1);
        assert_eq!(words[0].pos_tag, PosTag::Num);
        assert!(words[0].is_content);
    }

    #[test]
    fn jack_is_happy_tags() {
        let words = segment("Jack is happy.", &PosPolicy::default(), TaskKind::Generic).unwrap();
        let got: Vec<(&str, PosTag, bool)> = words
            .iter()
            .map(|w| (w.surface.as_str(), w.pos_tag, w.is_content))
            .collect();
        assert_eq!(
            got,
            vec![
                ("Jack", PosTag::Propn, true),
                ("is", PosTag::Aux, false),
                ("happy", PosTag::Adj, true),
                (".", PosTag::Punct, false),
            ]
        );
    }

    #[test]
    fn reconstruction_from_spans() {
        let text = "A 42-year-old man, named David, lives in New York City.";
        let words = segment(text, &PosPolicy::default(), TaskKind::Generic).unwrap();
        let mut rebuilt = String::new();
        let mut cursor = 0;
        for w in &words {
            rebuilt.push_str(&text[cursor..w.char_start]);
            rebuilt.push_str(&w.surface);
            cursor = w.char_end;
        }
        rebuilt.push_str(&text[cursor..]);
        assert_eq!(rebuilt, text);
    }

    #[test]
    fn codegen_overlay_forces_identifiers_to_content() {
        let words = segment(
            "set max_retries to httpTimeout",
            &PosPolicy::default(),
            TaskKind::Codegen,
        )
        .unwrap();
        let by_surface = |s: &str| words.iter().find(|w| w.surface == s).unwrap();
        assert_eq!(by_surface("max_retries").pos_tag, PosTag::Propn);
        assert!(by_surface("max_retries").is_content);
        assert_eq!(by_surface("httpTimeout").pos_tag, PosTag::Propn);
        // overlay leaves ordinary words alone
        assert!(!by_surface("to").is_content);
    }

    #[test]
    fn align_one_word_one_token() {
        let words = segment("hello", &PosPolicy::default(), TaskKind::Generic).unwrap();
        let tokens = vec![token("hello", 0, 5)];
        let alignment = align(&words, &tokens).unwrap();
        assert_eq!(alignment.token_range(0), 0..1);
    }

    #[test]
    fn align_subword_tokens_with_space_prefix() {
        // "Hello world" split as [Hello][ wor][ld]
        let words = segment("Hello world", &PosPolicy::default(), TaskKind::Generic).unwrap();
        let tokens = vec![
            token("Hello", 0, 5),
            token(" wor", 5, 9),
            token("ld", 9, 11),
        ];
        let alignment = align(&words, &tokens).unwrap();
        assert_eq!(alignment.token_range(0), 0..1);
        assert_eq!(alignment.token_range(1), 1..3);
    }

    #[test]
    fn align_two_words_three_tokens() {
        // "San Francisco" as words [San][Francisco], tokens [San][ Fran][cisco]
        let text = "San Francisco";
        let words = segment(text, &PosPolicy::default(), TaskKind::Generic).unwrap();
        let tokens = vec![
            token("San", 0, 3),
            token(" Fran", 3, 8),
            token("cisco", 8, 13),
        ];
        let alignment = align(&words, &tokens).unwrap();
        assert_eq!(alignment.token_range(0), 0..1);
        assert_eq!(alignment.token_range(1), 1..3);
    }

    #[test]
    fn align_rejects_uncovered_word() {
        let words = segment("ab cd", &PosPolicy::default(), TaskKind::Generic).unwrap();
        let tokens = vec![token("ab", 0, 2)];
        assert!(matches!(align(&words, &tokens), Err(Error::Alignment(_))));
    }

    #[test]
    fn align_partitions_non_special_tokens() {
        let text = "one two three";
        let words = segment(text, &PosPolicy::default(), TaskKind::Generic).unwrap();
        let tokens = vec![
            token("one", 0, 3),
            token(" two", 3, 7),
            token(" three", 7, 13),
        ];
        let alignment = align(&words, &tokens).unwrap();
        let mut seen = vec![false; tokens.len()];
        for range in alignment.iter() {
            for ti in range {
                assert!(!seen[ti], "token assigned twice");
                seen[ti] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
