//! Rule-based English part-of-speech tagger.
//!
//! Closed-class words come from fixed lexicons; open-class words are
//! tagged by capitalization, morphology, and a small common-word list,
//! defaulting to NOUN. Coarse tags follow the universal tag set. The
//! tagger is deterministic, so segmentation output is golden-file
//! stable across runs.

use std::collections::HashSet;

use once_cell::sync::Lazy;

use super::PosTag;

static DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "either", "neither",
    "some", "any", "no", "another", "such", "both", "all", "few", "several", "many", "most",
    "much", "its", "his", "her", "their", "our", "my", "your",
];

static PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "myself", "yourself",
    "himself", "herself", "itself", "ourselves", "themselves", "who", "whom", "whose", "which",
    "what", "someone", "anyone", "everyone", "nobody", "something", "anything", "everything",
    "nothing", "one", "mine", "yours", "hers", "ours", "theirs",
];

static ADPOSITIONS: &[&str] = &[
    "in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through",
    "during", "before", "after", "above", "below", "to", "from", "up", "down", "of", "off",
    "over", "under", "again", "near", "across", "behind", "beyond", "within", "without",
    "along", "around", "among", "onto", "upon", "per", "toward", "towards", "via",
];

static AUXILIARIES: &[&str] = &[
    "is", "am", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having",
    "do", "does", "did", "will", "would", "shall", "should", "may", "might", "must", "can",
    "could", "ought",
];

static COORDINATORS: &[&str] = &["and", "or", "but", "nor", "yet", "so", "plus"];

static SUBORDINATORS: &[&str] = &[
    "if", "because", "while", "although", "though", "since", "unless", "whereas", "whether",
    "until", "once", "when", "whenever", "where", "wherever", "than", "that", "as",
];

static PARTICLES: &[&str] = &["not", "n't"];

static ADVERBS: &[&str] = &[
    "very", "too", "also", "just", "now", "then", "here", "there", "always", "never", "often",
    "sometimes", "usually", "almost", "already", "still", "even", "only", "quite", "rather",
    "soon", "well", "however", "instead", "perhaps", "maybe", "again", "away", "back", "ever",
    "far", "fast", "hard", "late", "today", "tomorrow", "yesterday", "together", "typically",
];

static NUMBER_WORDS: &[&str] = &[
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty",
    "ninety", "hundred", "thousand", "million", "billion", "first", "second", "third",
];

/// Frequent adjectives that morphology alone would miss.
static COMMON_ADJECTIVES: &[&str] = &[
    "happy", "sad", "big", "small", "large", "little", "old", "young", "new", "good", "bad",
    "best", "worst", "better", "worse", "high", "low", "long", "short", "great", "right",
    "wrong", "early", "late", "hot", "cold", "warm", "cool", "fast", "slow", "hard", "soft",
    "easy", "rich", "poor", "strong", "weak", "dark", "light", "heavy", "clean", "dirty",
    "dull", "sharp", "quiet", "loud", "safe", "sick", "healthy", "dead", "alive", "free",
    "full", "empty", "open", "closed", "same", "different", "main", "major", "minor",
    "common", "rare", "chronic", "acute", "severe", "mild", "private", "public", "senior",
    "junior", "blue", "red", "green", "black", "white", "gray", "brown", "next", "last",
    "own", "other", "several", "sure", "true", "false", "wide", "deep", "tall", "thin",
    "thick", "fine", "nice", "kind", "busy", "ready", "simple", "complex", "recent",
    "medical", "physical", "chemical", "general", "local", "national", "personal", "final",
    "normal", "typical", "critical", "digital", "annual", "legal", "global", "important",
    "relevant", "present", "quiet", "calm", "fresh", "sweet", "sour", "rough", "smooth",
];

/// Frequent nouns whose endings would otherwise trip the morphology
/// rules (-ing, -ed, -able, and similar).
static COMMON_NOUNS: &[&str] = &[
    "morning", "evening", "meeting", "building", "thing", "king", "ring", "spring", "string",
    "feeling", "wedding", "ceiling", "painting", "training", "warning", "beginning", "ending",
    "bed", "seed", "speed", "breed", "deed", "feed", "table", "cable", "fable", "stable",
    "vegetable", "music", "magic", "logic", "traffic", "public", "fabric",
];

/// Frequent verb forms (base, 3rd person, and irregular past forms).
static COMMON_VERBS: &[&str] = &[
    "go", "goes", "went", "gone", "make", "makes", "made", "take", "takes", "took", "taken",
    "get", "gets", "got", "gotten", "say", "says", "said", "see", "sees", "saw", "seen",
    "come", "comes", "came", "know", "knows", "knew", "known", "think", "thinks", "thought",
    "find", "finds", "found", "give", "gives", "gave", "given", "tell", "tells", "told",
    "work", "works", "call", "calls", "use", "uses", "want", "wants", "need", "needs",
    "keep", "keeps", "kept", "let", "lets", "put", "puts", "run", "runs", "ran", "sit",
    "sits", "sat", "stand", "stands", "stood", "live", "lives", "meet", "meets", "met",
    "write", "writes", "wrote", "written", "read", "reads", "pay", "pays", "paid", "ask",
    "asks", "feel", "feels", "felt", "leave", "leaves", "left", "show", "shows", "shown",
    "present", "presents", "include", "includes", "confirm", "confirms", "return", "returns",
    "begin", "begins", "began", "become", "becomes", "became", "seem", "seems", "help",
    "helps", "play", "plays", "move", "moves", "believe", "believes", "bring", "brings",
    "brought", "happen", "happens", "provide", "provides", "intensify", "intensifies",
    "persist", "persists", "eat", "eats", "ate", "drink", "drinks", "drank", "sleep",
    "sleeps", "slept", "speak", "speaks", "spoke", "buy", "buys", "bought", "send", "sends",
    "sent", "grow", "grows", "grew", "win", "wins", "won", "hold", "holds", "held",
];

fn set(words: &'static [&'static str]) -> HashSet<&'static str> {
    words.iter().copied().collect()
}

struct Lexicons {
    det: HashSet<&'static str>,
    pron: HashSet<&'static str>,
    adp: HashSet<&'static str>,
    aux: HashSet<&'static str>,
    cconj: HashSet<&'static str>,
    sconj: HashSet<&'static str>,
    part: HashSet<&'static str>,
    adv: HashSet<&'static str>,
    num: HashSet<&'static str>,
    adj: HashSet<&'static str>,
    verb: HashSet<&'static str>,
    noun: HashSet<&'static str>,
}

static LEXICONS: Lazy<Lexicons> = Lazy::new(|| Lexicons {
    det: set(DETERMINERS),
    pron: set(PRONOUNS),
    adp: set(ADPOSITIONS),
    aux: set(AUXILIARIES),
    cconj: set(COORDINATORS),
    sconj: set(SUBORDINATORS),
    part: set(PARTICLES),
    adv: set(ADVERBS),
    num: set(NUMBER_WORDS),
    adj: set(COMMON_ADJECTIVES),
    verb: set(COMMON_VERBS),
    noun: set(COMMON_NOUNS),
});

fn is_numeric_surface(surface: &str) -> bool {
    let mut saw_digit = false;
    for c in surface.chars() {
        if c.is_ascii_digit() {
            saw_digit = true;
        } else if c != '.' && c != ',' {
            return false;
        }
    }
    saw_digit
}

/// Tag a closed-class or known open-class word by its lowercase form.
fn lexicon_tag(lower: &str) -> Option<PosTag> {
    let lex = &LEXICONS;
    if lex.det.contains(lower) {
        Some(PosTag::Det)
    } else if lex.pron.contains(lower) {
        Some(PosTag::Pron)
    } else if lex.aux.contains(lower) {
        Some(PosTag::Aux)
    } else if lex.adp.contains(lower) {
        Some(PosTag::Adp)
    } else if lex.cconj.contains(lower) {
        Some(PosTag::Cconj)
    } else if lex.sconj.contains(lower) {
        Some(PosTag::Sconj)
    } else if lex.part.contains(lower) {
        Some(PosTag::Part)
    } else if lex.num.contains(lower) {
        Some(PosTag::Num)
    } else if lex.adv.contains(lower) {
        Some(PosTag::Adv)
    } else if lex.adj.contains(lower) {
        Some(PosTag::Adj)
    } else if lex.verb.contains(lower) {
        Some(PosTag::Verb)
    } else if lex.noun.contains(lower) {
        Some(PosTag::Noun)
    } else {
        None
    }
}

fn morphology_tag(lower: &str) -> Option<PosTag> {
    // Each suffix rule requires a stem of at least three characters.
    let has_suffix = |suffixes: &[&str]| {
        suffixes
            .iter()
            .any(|s| lower.len() >= s.len() + 3 && lower.ends_with(s))
    };
    if has_suffix(&["ly"]) {
        return Some(PosTag::Adv);
    }
    if has_suffix(&["ous", "ful", "ive", "able", "ible", "ish", "less"]) {
        return Some(PosTag::Adj);
    }
    if has_suffix(&["ing", "ed", "ize", "izes", "ise"]) {
        return Some(PosTag::Verb);
    }
    None
}

/// Tag one lexeme.
///
/// `sentence_initial` switches the capitalization heuristic: a
/// capitalized word mid-sentence is a proper noun unless the lexicon
/// knows it, while at sentence start capitalization is uninformative.
pub fn tag(surface: &str, sentence_initial: bool) -> PosTag {
    if !surface.chars().any(char::is_alphanumeric) {
        return PosTag::Punct;
    }
    if is_numeric_surface(surface) {
        return PosTag::Num;
    }
    let lower = surface.to_lowercase();
    let capitalized = surface.chars().next().is_some_and(char::is_uppercase);

    if capitalized && !sentence_initial {
        // Lexicon still wins for closed-class words ("The" in a title).
        return match lexicon_tag(&lower) {
            Some(t) if t != PosTag::Noun => t,
            _ => PosTag::Propn,
        };
    }
    if let Some(t) = lexicon_tag(&lower) {
        return t;
    }
    if let Some(t) = morphology_tag(&lower) {
        return t;
    }
    if capitalized {
        // Sentence-initial and unknown: treat as a proper noun.
        return PosTag::Propn;
    }
    PosTag::Noun
}

/// True when a surface looks like a code identifier (snake_case,
/// camelCase, or letter/digit mixes).
pub fn looks_like_identifier(surface: &str) -> bool {
    if surface.contains('_') {
        return true;
    }
    let has_alpha = surface.chars().any(char::is_alphabetic);
    let has_digit = surface.chars().any(|c| c.is_ascii_digit());
    if has_alpha && has_digit {
        return true;
    }
    // inner uppercase after a lowercase start: camelCase
    let mut chars = surface.chars();
    match chars.next() {
        Some(first) if first.is_lowercase() => chars.any(char::is_uppercase),
        _ => false,
    }
}
