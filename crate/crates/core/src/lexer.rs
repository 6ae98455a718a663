//! Low-level word splitting shared by the segmenter and the built-in
//! backend tokenizers.
//!
//! A lexeme is a maximal run of word characters (alphanumeric or `_`,
//! plus apostrophes and `.`/`,` when flanked by word characters, so
//! "don't" and "39.5" stay whole), or a single non-whitespace symbol.
//! Whitespace never appears inside a lexeme. Offsets are byte offsets
//! into the original string.

/// A raw lexeme with its byte span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexeme {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// True when `c` may join two word characters (internal punctuation).
fn is_joiner(c: char, prev: Option<char>, next: Option<char>) -> bool {
    let flanked = |f: fn(char) -> bool| {
        prev.map(f).unwrap_or(false) && next.map(f).unwrap_or(false)
    };
    match c {
        '\'' | '\u{2019}' => flanked(|c| c.is_alphabetic()),
        '.' | ',' => flanked(|c| c.is_ascii_digit()),
        _ => false,
    }
}

/// Split `text` into lexemes.
pub fn lex(text: &str) -> Vec<Lexeme> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if is_word_char(cj) {
                    j += 1;
                } else if is_joiner(
                    cj,
                    Some(chars[j - 1].1),
                    chars.get(j + 1).map(|&(_, c)| c),
                ) {
                    j += 1;
                } else {
                    break;
                }
            }
            let end = if j < chars.len() {
                chars[j].0
            } else {
                text.len()
            };
            out.push(Lexeme {
                surface: text[start..end].to_string(),
                char_start: start,
                char_end: end,
            });
            i = j;
        } else {
            // single symbol lexeme
            let end = chars.get(i + 1).map(|&(o, _)| o).unwrap_or(text.len());
            out.push(Lexeme {
                surface: text[start..end].to_string(),
                char_start: start,
                char_end: end,
            });
            i += 1;
        }
    }
    out
}
