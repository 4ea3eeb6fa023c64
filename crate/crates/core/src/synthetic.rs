//! Synthetic corpus with disjoint per-journal topic vocabularies.
//!
//! Used for smoke tests, fixtures and desk-scale demonstrations. Every
//! word is made of letters only and none collides with a stop word.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{JournalProfile, PaperRecord};

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 6] = ["x", "q", "rn", "lk", "mp", "nd"];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub journals: usize,
    pub docs_per_journal: usize,
    pub topic_words: usize,
    pub shared_words: usize,
    pub title_len: usize,
    pub abstract_len: usize,
    pub keywords: usize,
    /// Probability that an abstract word comes from the shared pool.
    pub shared_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            journals: 8,
            docs_per_journal: 25,
            topic_words: 24,
            shared_words: 40,
            title_len: 4,
            abstract_len: 18,
            keywords: 3,
            shared_ratio: 0.3,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub journals: Vec<JournalProfile>,
    pub papers: Vec<PaperRecord>,
}

/// Word `i` of pool `pool`; distinct pools never share a word.
fn word(pool: usize, i: usize) -> String {
    let tail = CODAS[pool % CODAS.len()];
    let lead = ONSETS[(pool / CODAS.len()) % ONSETS.len()];
    let a = ONSETS[i % ONSETS.len()];
    let v1 = VOWELS[(i / ONSETS.len()) % VOWELS.len()];
    let v2 = VOWELS[pool % VOWELS.len()];
    // pool is encoded by (lead, tail, v2); i by (a, v1) plus an extension for large pools
    let ext = i / (ONSETS.len() * VOWELS.len());
    let mut w = format!("{lead}{v2}{a}{v1}{tail}");
    for _ in 0..ext {
        w.push_str("o");
    }
    w.push_str(&String::from(char::from(b'a' + (pool / (CODAS.len() * ONSETS.len())) as u8 % 26)));
    w
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared_pool = spec.journals;
    let shared: Vec<String> = (0..spec.shared_words).map(|i| word(shared_pool, i)).collect();
    let mut journals = Vec::with_capacity(spec.journals);
    let mut papers = Vec::with_capacity(spec.journals * spec.docs_per_journal);
    for j in 0..spec.journals {
        let topic: Vec<String> = (0..spec.topic_words).map(|i| word(j, i)).collect();
        let mut scope: Vec<&str> = topic.iter().map(String::as_str).collect();
        scope.extend(shared.iter().take(6).map(String::as_str));
        journals.push(JournalProfile {
            journal_id: format!("J{j}"),
            name: format!("Journal of Topic {j}"),
            scope_text: scope.join(" "),
        });
        for d in 0..spec.docs_per_journal {
            let pick = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
                (0..n).map(|_| topic.choose(rng).cloned().unwrap_or_default()).collect()
            };
            let title = pick(&mut rng, spec.title_len).join(" ");
            let abstract_text = (0..spec.abstract_len)
                .map(|_| {
                    if rng.random::<f64>() < spec.shared_ratio {
                        shared.choose(&mut rng).cloned().unwrap_or_default()
                    } else {
                        topic.choose(&mut rng).cloned().unwrap_or_default()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ");
            let keywords = pick(&mut rng, spec.keywords);
            papers.push(PaperRecord {
                id: format!("syn-{j}-{d}"),
                title,
                abstract_text,
                keywords,
                journal_id: format!("J{j}"),
            });
        }
    }
    SyntheticCorpus { journals, papers }
}
