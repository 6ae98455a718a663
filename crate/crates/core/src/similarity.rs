//! Word similarity over an embedded lexical database.
//!
//! The database organizes lemmas into synonym sets linked by
//! hypernym edges (a curated subset shaped like the standard English
//! lexical networks). Similarity between two words is the best
//! 1/(1 + shortest-path-length) over their synset pairs, so members
//! of one synset score 1.0 and unrelated words decay toward 0.
//!
//! Words missing from the database fall back to normalized
//! character-edit similarity, clamped to at most 0.5 when either word
//! looks like a proper noun — names are semantically unrelated even
//! when orthographically close.

use std::collections::{HashMap, VecDeque};

use once_cell::sync::Lazy;

const LEXNET_TSV: &str = include_str!("../data/lexnet.tsv");

/// Two words in the same synset score at least this much; used by the
/// evaluation's semantic hiding rule.
pub const SYNONYM_THRESHOLD: f64 = 0.9;

/// Synset graph with lemma lookup.
pub struct LexNet {
    /// lemma -> synset ids
    lemmas: HashMap<String, Vec<usize>>,
    /// undirected hypernym adjacency
    edges: Vec<Vec<usize>>,
}

impl LexNet {
    fn load(tsv: &str) -> LexNet {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut rows: Vec<(&str, &str, &str)> = Vec::new();
        for line in tsv.lines() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let id = parts.next().expect("synset id");
            let _pos = parts.next().expect("synset pos");
            let lemma_field = parts.next().expect("synset lemmas");
            let hyper_field = parts.next().unwrap_or("");
            let idx = ids.len();
            ids.insert(id, idx);
            rows.push((id, lemma_field, hyper_field));
        }

        let mut lemmas: HashMap<String, Vec<usize>> = HashMap::new();
        let mut edges: Vec<Vec<usize>> = vec![Vec::new(); rows.len()];
        for (i, (_, lemma_field, hyper_field)) in rows.iter().enumerate() {
            for lemma in lemma_field.split('|') {
                lemmas.entry(lemma.to_string()).or_default().push(i);
            }
            for hyper in hyper_field.split(',') {
                let hyper = hyper.trim();
                if hyper.is_empty() {
                    continue;
                }
                let h = *ids
                    .get(hyper)
                    .unwrap_or_else(|| panic!("unknown hypernym id {hyper}"));
                edges[i].push(h);
                edges[h].push(i);
            }
        }
        LexNet { lemmas, edges }
    }

    /// Process-wide database built from the embedded table.
    pub fn shared() -> &'static LexNet {
        static NET: Lazy<LexNet> = Lazy::new(|| LexNet::load(LEXNET_TSV));
        &NET
    }

    fn synsets_of(&self, word: &str) -> Vec<usize> {
        for variant in lemma_variants(word) {
            if let Some(ids) = self.lemmas.get(&variant) {
                return ids.clone();
            }
        }
        Vec::new()
    }

    fn shortest_path(&self, from: usize, to: usize) -> Option<usize> {
        if from == to {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.edges.len()];
        let mut queue = VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        while let Some(node) = queue.pop_front() {
            for &next in &self.edges[node] {
                if dist[next] == usize::MAX {
                    dist[next] = dist[node] + 1;
                    if next == to {
                        return Some(dist[next]);
                    }
                    queue.push_back(next);
                }
            }
        }
        None
    }

    /// Best path similarity over synset pairs, or `None` when either
    /// word has no synset.
    pub fn path_similarity(&self, a: &str, b: &str) -> Option<f64> {
        let sa = self.synsets_of(a);
        let sb = self.synsets_of(b);
        if sa.is_empty() || sb.is_empty() {
            return None;
        }
        let mut best = 0.0f64;
        for &x in &sa {
            for &y in &sb {
                if let Some(d) = self.shortest_path(x, y) {
                    best = best.max(1.0 / (1.0 + d as f64));
                }
            }
        }
        Some(best)
    }
}

fn normalize(word: &str) -> String {
    word.trim().to_lowercase().replace([' ', '-'], "_")
}

/// Lemma lookup variants: normalized surface, then light plural stripping.
fn lemma_variants(word: &str) -> Vec<String> {
    let base = normalize(word);
    let mut out = vec![base.clone()];
    if let Some(stem) = base.strip_suffix("ies") {
        if stem.len() >= 2 {
            out.push(format!("{stem}y"));
        }
    }
    if let Some(stem) = base.strip_suffix("es") {
        if stem.len() >= 3 {
            out.push(stem.to_string());
        }
    }
    if let Some(stem) = base.strip_suffix('s') {
        if stem.len() >= 3 && !stem.ends_with('s') {
            out.push(stem.to_string());
        }
    }
    out
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn edit_similarity(a: &str, b: &str) -> f64 {
    let a = normalize(a);
    let b = normalize(b);
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / max_len as f64
}

fn looks_proper(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// True when two surfaces normalize to the same lemma (case- and
/// plural-insensitive); used to exclude the original word from its own
/// candidate set.
pub fn same_lemma(a: &str, b: &str) -> bool {
    let va = lemma_variants(a);
    let vb = lemma_variants(b);
    va.iter().any(|x| vb.contains(x))
}

/// Similarity in [0, 1] between a word and a replacement candidate.
///
/// Identical words (case-insensitive, plural-insensitive) score 1.0;
/// otherwise the lexical database decides; words absent from it fall
/// back to edit similarity with the proper-noun clamp.
pub fn similarity(original: &str, candidate: &str) -> f64 {
    if same_lemma(original, candidate) {
        return 1.0;
    }
    if let Some(sim) = LexNet::shared().path_similarity(original, candidate) {
        return sim;
    }
    let mut sim = edit_similarity(original, candidate);
    if looks_proper(original) || looks_proper(candidate) {
        sim = sim.min(0.5);
    }
    sim
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_synset_scores_one() {
        assert_eq!(similarity("America", "USA"), 1.0);
        assert_eq!(similarity("doctor", "physician"), 1.0);
        assert_eq!(similarity("farmer", "granger"), 1.0);
    }

    #[test]
    fn sibling_countries_score_one_third() {
        let sim = similarity("America", "Canada");
        assert!((sim - 1.0 / 3.0).abs() < 0.02, "sim={sim}");
    }

    #[test]
    fn identical_surface_is_one() {
        assert_eq!(similarity("Jack", "Jack"), 1.0);
        assert_eq!(similarity("jack", "JACK"), 1.0);
    }

    #[test]
    fn plural_forms_match() {
        assert_eq!(similarity("farmers", "farmer"), 1.0);
        assert_eq!(similarity("city", "cities"), 1.0);
    }

    #[test]
    fn hyponym_is_half() {
        assert!((similarity("farmer", "rancher") - 0.5).abs() < 1e-9);
    }

    #[test]
    fn unknown_words_fall_back_to_edit_similarity() {
        let sim = similarity("flurgle", "flurgles"); // plural match
        assert_eq!(sim, 1.0);
        let sim = similarity("flurgle", "flurgly");
        assert!(sim > 0.5 && sim < 1.0);
    }

    #[test]
    fn proper_noun_fallback_is_clamped() {
        // Orthographically close names must not look similar.
        let sim = similarity("Jack", "Jace");
        assert!(sim <= 0.5, "sim={sim}");
        let sim = similarity("Marissa", "Larissa");
        assert!(sim <= 0.5, "sim={sim}");
    }

    #[test]
    fn range_is_unit_interval() {
        for (a, b) in [
            ("cat", "dog"),
            ("doctor", "teacher"),
            ("x", "y"),
            ("Paris", "London"),
            ("", "a"),
        ] {
            let s = similarity(a, b);
            assert!((0.0..=1.0).contains(&s), "{a}/{b} -> {s}");
        }
    }

    #[test]
    fn related_occupations_beat_unrelated_pairs() {
        let close = similarity("doctor", "nurse");
        let far = similarity("doctor", "apple");
        assert!(close > far, "close={close} far={far}");
    }
}
