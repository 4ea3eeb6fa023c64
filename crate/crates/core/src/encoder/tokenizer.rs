use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub const PAD_ID: usize = 0;
pub const CLS_ID: usize = 1;
pub const UNK_ID: usize = 2;
pub const SPECIAL_TOKENS: [&str; 3] = ["[PAD]", "[CLS]", "[UNK]"];

/// Whole-word whitespace vocabulary. Ids 0..3 are the special tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Words seen at least `min_count` times, most frequent first (ties by
    /// lexical order), truncated so the whole vocabulary fits in `max_size`.
    pub fn build<S: AsRef<str>>(texts: &[S], min_count: usize, max_size: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in texts {
            for w in t.as_ref().split_whitespace() {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_count.max(1)).collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let budget = max_size.saturating_sub(SPECIAL_TOKENS.len());
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().take(budget).map(|(w, _)| w.to_string()))
            .collect();
        Self::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    /// Rebuilds a vocabulary from its token list (as stored in artifacts).
    pub fn from_tokens(tokens: Vec<String>) -> Option<Self> {
        if tokens.len() < SPECIAL_TOKENS.len() || tokens.iter().zip(SPECIAL_TOKENS).any(|(a, b)| a != b) {
            return None;
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return None;
            }
        }
        Some(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    /// Classification token, then word ids, truncated and padded to `max_len`.
    ///
    /// Panics if `max_len < 2`.
    pub fn tokenize<S: AsRef<str>>(&self, texts: &[S], max_len: usize) -> TokenizedBatch {
        assert!(max_len >= 2, "max_len must leave room for [CLS] and one token");
        let mut token_ids = Vec::with_capacity(texts.len() * max_len);
        let mut lengths = Vec::with_capacity(texts.len());
        for t in texts {
            let start = token_ids.len();
            token_ids.push(CLS_ID);
            token_ids.extend(t.as_ref().split_whitespace().take(max_len - 1).map(|w| self.id(w)));
            lengths.push(token_ids.len() - start);
            token_ids.resize(start + max_len, PAD_ID);
        }
        TokenizedBatch { token_ids, lengths, max_len }
    }
}

/// `rows × max_len` token ids with prefix-contiguous attention masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedBatch {
    token_ids: Vec<usize>,
    lengths: Vec<usize>,
    max_len: usize,
}

impl TokenizedBatch {
    pub fn rows(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn ids(&self, row: usize) -> &[usize] {
        &self.token_ids[row * self.max_len..(row + 1) * self.max_len]
    }

    /// Number of real (unmasked) tokens in a row, including `[CLS]`.
    pub fn valid_len(&self, row: usize) -> usize {
        self.lengths[row]
    }

    pub fn mask(&self, row: usize) -> Vec<u8> {
        (0..self.max_len).map(|i| u8::from(i < self.lengths[row])).collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, rows: &[usize]) -> TokenizedBatch {
        let mut token_ids = Vec::with_capacity(rows.len() * self.max_len);
        for &r in rows {
            token_ids.extend_from_slice(self.ids(r));
        }
        TokenizedBatch { token_ids, lengths: rows.iter().map(|&r| self.lengths[r]).collect(), max_len: self.max_len }
    }
}
