//! Text normalization for paper fields and journal scope descriptions.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

/// Frozen English stop-word list shipped with the crate.
pub const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Project-local extension list shipped with the crate (empty by default).
pub const EXTRA_STOPWORDS: &str = include_str!("../data/stopwords_extra.txt");

/// Parses a stop-word list: one token per line, `#` starts a comment.
pub fn parse_stopword_list(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

fn is_url(token: &str) -> bool {
    token.contains("://") || token.starts_with("www.")
}

/// Applies the six cleaning rules with a configurable stop-word set.
///
/// Executable order: lowercase, drop URL tokens, strip punctuation, drop
/// stop words, collapse whitespace, drop tokens with non-alphabetic
/// characters (letters with no lowercase form count as non-alphabetic).
/// URL tokens are recognised before punctuation is stripped,
/// otherwise `https://x.co` would survive as `httpsxco`.
#[derive(Clone, Debug)]
pub struct Normalizer {
    stopwords: BTreeSet<String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        let mut n = Self::empty();
        n.extend_stopwords(parse_stopword_list(ENGLISH_STOPWORDS));
        n.extend_stopwords(parse_stopword_list(EXTRA_STOPWORDS));
        n
    }
}

impl Normalizer {
    /// A normalizer with no stop words at all.
    pub fn empty() -> Self {
        Self { stopwords: BTreeSet::new() }
    }

    /// Adds stop words. Entries are lowercased and stripped of punctuation
    /// so that `don't` also matches the cleaned token `dont`.
    pub fn extend_stopwords<'a>(&mut self, words: impl IntoIterator<Item = &'a str>) {
        for w in words {
            let cleaned: String = w.to_lowercase().chars().filter(|c| !is_punctuation(*c)).collect();
            if !cleaned.is_empty() {
                self.stopwords.insert(cleaned);
            }
        }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopword_count(&self) -> usize {
        self.stopwords.len()
    }

    /// Stop words in lexical order.
    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }

    pub fn normalize(&self, raw: &str) -> String {
        let lowered = raw.to_lowercase();
        let mut out = String::with_capacity(lowered.len());
        for token in lowered.split_whitespace() {
            if is_url(token) {
                continue;
            }
            let cleaned: String = token.chars().filter(|c| !is_punctuation(*c)).collect();
            // punctuation removal never introduces whitespace, so one token stays one token
            if cleaned.is_empty() || self.is_stopword(&cleaned) {
                continue;
            }
            if !cleaned.chars().all(|c| c.is_alphabetic() && !c.is_uppercase()) {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&cleaned);
        }
        out
    }

    /// Normalizes each item and joins the non-empty results with single spaces.
    pub fn normalize_joined<S: AsRef<str>>(&self, parts: &[S]) -> String {
        let pieces: Vec<String> =
            parts.iter().map(|p| self.normalize(p.as_ref())).filter(|p| !p.is_empty()).collect();
        pieces.join(" ")
    }
}

/// Normalizes with the built-in stop-word lists.
pub fn normalize_text(raw: &str) -> String {
    Normalizer::default().normalize(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spec_examples() {
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("Check https://x.co NOW!!"), "check");
        assert_eq!(normalize_text("Deep Learning 101"), "deep learning");
    }

    #[test]
    fn stopword_list_is_frozen() {
        assert_eq!(parse_stopword_list(ENGLISH_STOPWORDS).count(), 179);
        assert_eq!(parse_stopword_list(EXTRA_STOPWORDS).count(), 0);
        let n = Normalizer::default();
        assert!(n.is_stopword("dont"));
        assert!(n.is_stopword("the"));
    }

    #[test]
    fn punctuation_and_spacing() {
        let n = Normalizer::default();
        assert_eq!(n.normalize("  Graph\t\tNeural,   Networks. "), "graph neural networks");
        assert_eq!(n.normalize("state-of-the-art"), "stateoftheart");
        assert_eq!(n.normalize("see www.example.org for COVID-19 data"), "see data");
        assert_eq!(n.normalize("x2 protein"), "protein");
    }

    #[test]
    fn extension_words_apply() {
        let mut n = Normalizer::default();
        n.extend_stopwords(parse_stopword_list("# local\npaper\nStudy # trailing comment\n"));
        assert_eq!(n.normalize("This paper presents a study of graphs"), "presents graphs");
    }

    proptest! {
        #[test]
        fn idempotent(raw in "\\PC{0,60}") {
            let n = Normalizer::default();
            let once = n.normalize(&raw);
            prop_assert_eq!(n.normalize(&once), once.clone());
        }

        #[test]
        fn idempotent_on_mixed_ascii(raw in "[A-Za-z0-9 .,;:!?'/-]{0,80}") {
            let once = normalize_text(&raw);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn output_is_clean(raw in "\\PC{0,60}") {
            let n = Normalizer::default();
            let out = n.normalize(&raw);
            prop_assert!(!out.contains("  "));
            for token in out.split(' ').filter(|t| !t.is_empty()) {
                prop_assert!(token.chars().all(char::is_alphabetic));
                prop_assert!(!n.is_stopword(token));
                prop_assert!(!token.chars().any(char::is_uppercase));
            }
        }
    }
}
