//! Paper and journal records, feature combinations and dataset assembly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::hash::{fnv1a64, Fnv64};
use crate::text::Normalizer;

/// One paper submission.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    #[cfg_attr(feature = "serde", serde(rename = "abstract"))]
    pub abstract_text: String,
    pub keywords: Vec<String>,
    pub journal_id: String,
}

/// A journal and its aims & scopes description.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JournalProfile {
    pub journal_id: String,
    pub name: String,
    pub scope_text: String,
}

/// Journals ordered by ascending `journal_id`; the position in this table is
/// the class index used by the classification heads.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JournalTable {
    journals: Vec<JournalProfile>,
    index: BTreeMap<String, usize>,
}

impl JournalTable {
    /// Sorts by id. Fails on duplicate ids or empty scope text after normalization.
    pub fn new(mut journals: Vec<JournalProfile>, normalizer: &Normalizer) -> Result<Self> {
        journals.sort_by(|a, b| a.journal_id.cmp(&b.journal_id));
        let mut index = BTreeMap::new();
        for (i, j) in journals.iter().enumerate() {
            if index.insert(j.journal_id.clone(), i).is_some() {
                return Err(Error::InvalidConfig(alloc::format!("duplicate journal id {}", j.journal_id)));
            }
            if normalizer.normalize(&j.scope_text).is_empty() {
                return Err(Error::InvalidConfig(alloc::format!(
                    "journal {} has empty scope text after normalization",
                    j.journal_id
                )));
            }
        }
        Ok(Self { journals, index })
    }

    pub fn len(&self) -> usize {
        self.journals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.journals.is_empty()
    }

    pub fn get(&self, idx: usize) -> &JournalProfile {
        &self.journals[idx]
    }

    pub fn index_of(&self, journal_id: &str) -> Option<usize> {
        self.index.get(journal_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &JournalProfile> {
        self.journals.iter()
    }

    pub fn as_slice(&self) -> &[JournalProfile] {
        &self.journals
    }

    /// Normalized scope text per journal, in table order.
    pub fn scope_texts(&self, normalizer: &Normalizer) -> Vec<String> {
        self.journals.iter().map(|j| normalizer.normalize(&j.scope_text)).collect()
    }

    /// Content hash over ids, names and scope texts in table order.
    pub fn fingerprint(&self) -> String {
        let mut h = Fnv64::new();
        for j in &self.journals {
            h.write(j.journal_id.as_bytes()).write(&[0x1f]);
            h.write(j.name.as_bytes()).write(&[0x1f]);
            h.write(j.scope_text.as_bytes()).write(&[0x1e]);
        }
        h.hex()
    }
}

/// Which paper fields feed the classifier, and whether the scope branch is on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureCombo {
    pub title: bool,
    pub abstract_text: bool,
    pub keywords: bool,
    pub use_scopes: bool,
}

/// The 14 combinations in report order.
const REPORT_ORDER: [&str; 14] =
    ["T", "TS", "K", "KS", "A", "AS", "TK", "TKS", "TA", "TAS", "AK", "AKS", "TAK", "TAKS"];

impl FeatureCombo {
    pub const TAK: FeatureCombo = FeatureCombo { title: true, abstract_text: true, keywords: true, use_scopes: false };
    pub const TAKS: FeatureCombo = FeatureCombo { title: true, abstract_text: true, keywords: true, use_scopes: true };

    pub fn new(title: bool, abstract_text: bool, keywords: bool, use_scopes: bool) -> Result<Self> {
        if !(title || abstract_text || keywords) {
            return Err(Error::InvalidConfig("feature combo needs at least one paper field".into()));
        }
        Ok(Self { title, abstract_text, keywords, use_scopes })
    }

    /// All 14 valid combinations, in report order.
    pub fn all() -> Vec<FeatureCombo> {
        REPORT_ORDER.iter().map(|c| c.parse().expect("static combo codes parse")).collect()
    }

    /// Position in the report ordering.
    pub fn report_rank(&self) -> usize {
        let code = self.code();
        REPORT_ORDER.iter().position(|c| *c == code).expect("every valid combo is listed")
    }

    pub fn code(&self) -> String {
        let mut s = String::new();
        if self.title {
            s.push('T');
        }
        if self.abstract_text {
            s.push('A');
        }
        if self.keywords {
            s.push('K');
        }
        if self.use_scopes {
            s.push('S');
        }
        s
    }
}

impl fmt::Display for FeatureCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for FeatureCombo {
    type Err = Error;

    /// Accepts the letters T, A, K, S in any order, each at most once.
    fn from_str(s: &str) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in s.trim().chars() {
            let c = c.to_ascii_uppercase();
            if !matches!(c, 'T' | 'A' | 'K' | 'S') || !seen.insert(c) {
                return Err(Error::InvalidConfig(alloc::format!("bad feature combo {s:?}")));
            }
        }
        FeatureCombo::new(seen.contains(&'T'), seen.contains(&'A'), seen.contains(&'K'), seen.contains(&'S'))
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for FeatureCombo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.code())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for FeatureCombo {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Normalized selected fields in T, A, K order joined by single spaces.
/// The scope flag is ignored here; scope text flows through its own branch.
pub fn compose_features(normalizer: &Normalizer, record: &PaperRecord, combo: FeatureCombo) -> Result<String> {
    let mut parts: Vec<String> = Vec::with_capacity(3);
    if combo.title {
        parts.push(normalizer.normalize(&record.title));
    }
    if combo.abstract_text {
        parts.push(normalizer.normalize(&record.abstract_text));
    }
    if combo.keywords {
        parts.push(normalizer.normalize(&record.keywords.join(" ")));
    }
    parts.retain(|p| !p.is_empty());
    if parts.is_empty() {
        return Err(Error::AllFieldsEmpty);
    }
    Ok(parts.join(" "))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SplitSide {
    Train,
    Test,
}

/// Deterministic 80/20 assignment from the FNV-1a hash of the record id.
pub fn hash_split(id: &str) -> SplitSide {
    if fnv1a64(id.as_bytes()) % 100 < 80 {
        SplitSide::Train
    } else {
        SplitSide::Test
    }
}

/// Train/test records plus the journal table they reference.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<PaperRecord>,
    pub test: Vec<PaperRecord>,
    pub journals: JournalTable,
}

impl CorpusSplit {
    /// Checks train/test disjointness and that every referenced journal exists.
    pub fn new(train: Vec<PaperRecord>, test: Vec<PaperRecord>, journals: JournalTable) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for r in train.iter().chain(&test) {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::InvalidConfig(alloc::format!("paper id {} appears twice", r.id)));
            }
            if journals.index_of(&r.journal_id).is_none() {
                return Err(Error::UnknownJournal(r.journal_id.clone()));
            }
        }
        Ok(Self { train, test, journals })
    }

    /// Partitions records with [`hash_split`].
    pub fn by_hash(records: Vec<PaperRecord>, journals: JournalTable) -> Result<Self> {
        let (train, test) = records.into_iter().partition(|r| hash_split(&r.id) == SplitSide::Train);
        Self::new(train, test, journals)
    }

    /// Class index of a record's journal. The constructor guarantees it exists.
    pub fn label(&self, record: &PaperRecord) -> usize {
        self.journals.index_of(&record.journal_id).expect("validated on construction")
    }

    /// Content hash over journals and both splits.
    pub fn fingerprint(&self) -> String {
        let mut h = Fnv64::new();
        h.write(self.journals.fingerprint().as_bytes());
        for (tag, records) in [(b'r', &self.train), (b'e', &self.test)] {
            for r in records {
                h.write(&[tag]).write(r.id.as_bytes()).write(&[0x1f]);
                h.write(r.title.as_bytes()).write(&[0x1f]);
                h.write(r.abstract_text.as_bytes()).write(&[0x1f]);
                for k in &r.keywords {
                    h.write(k.as_bytes()).write(&[0x1d]);
                }
                h.write(r.journal_id.as_bytes()).write(&[0x1e]);
            }
        }
        h.hex()
    }
}

/// Contrastive training pairs: (paper text, scope text of its journal).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairDataset {
    pub pairs: Vec<(String, String)>,
    /// Training records dropped because all their fields normalized to nothing.
    pub skipped: usize,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn build_pair_dataset(normalizer: &Normalizer, split: &CorpusSplit) -> Result<PairDataset> {
    if split.train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    let scopes = split.journals.scope_texts(normalizer);
    let mut out = PairDataset::default();
    for record in &split.train {
        match compose_features(normalizer, record, FeatureCombo::TAK) {
            Ok(x) => out.pairs.push((x, scopes[split.label(record)].clone())),
            Err(Error::AllFieldsEmpty) => out.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Helper for fixtures and tests.
pub fn paper(id: &str, title: &str, abstract_text: &str, keywords: &[&str], journal_id: &str) -> PaperRecord {
    PaperRecord {
        id: id.to_string(),
        title: title.to_string(),
        abstract_text: abstract_text.to_string(),
        keywords: keywords.iter().map(|k| k.to_string()).collect(),
        journal_id: journal_id.to_string(),
    }
}

pub fn journal(journal_id: &str, name: &str, scope_text: &str) -> JournalProfile {
    JournalProfile { journal_id: journal_id.to_string(), name: name.to_string(), scope_text: scope_text.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn abcd() -> PaperRecord {
        paper("p1", "A", "B", &["c", "d"], "J1")
    }

    #[test]
    fn compose_order_and_joiner() {
        // single letters are stop words in the shipped list, so check the
        // joiner rule with no stop words
        let n = Normalizer::empty();
        let r = abcd();
        let t: FeatureCombo = "T".parse().unwrap();
        let tk: FeatureCombo = "TK".parse().unwrap();
        let tak: FeatureCombo = "KAT".parse().unwrap();
        assert_eq!(compose_features(&n, &r, t).unwrap(), "a");
        assert_eq!(compose_features(&n, &r, tk).unwrap(), "a c d");
        assert_eq!(compose_features(&n, &r, tak).unwrap(), "a b c d");
    }

    #[test]
    fn compose_with_default_stopwords() {
        let n = Normalizer::default();
        let r = paper("p", "Graph Networks", "We study THE networks.", &["GNN", "deep-learning"], "J");
        assert_eq!(compose_features(&n, &r, FeatureCombo::TAK).unwrap(), "graph networks study networks gnn deeplearning");
        assert_eq!(compose_features(&n, &abcd(), "T".parse().unwrap()), Err(Error::AllFieldsEmpty));
    }

    #[test]
    fn scope_flag_does_not_change_text() {
        let n = Normalizer::empty();
        assert_eq!(
            compose_features(&n, &abcd(), FeatureCombo::TAK),
            compose_features(&n, &abcd(), FeatureCombo::TAKS)
        );
    }

    #[test]
    fn fourteen_combos() {
        let all = FeatureCombo::all();
        assert_eq!(all.len(), 14);
        let set: BTreeSet<_> = all.iter().collect();
        assert_eq!(set.len(), 14);
        assert_eq!(all.iter().filter(|c| c.use_scopes).count(), 7);
        for (i, c) in all.iter().enumerate() {
            assert_eq!(c.report_rank(), i);
            assert_eq!(c.code().parse::<FeatureCombo>().unwrap(), *c);
        }
        assert!("S".parse::<FeatureCombo>().is_err());
        assert!("".parse::<FeatureCombo>().is_err());
        assert!("TT".parse::<FeatureCombo>().is_err());
        assert!("TX".parse::<FeatureCombo>().is_err());
    }

    fn two_journals() -> JournalTable {
        JournalTable::new(
            vec![journal("J2", "Beta", "optics lasers photonics"), journal("J1", "Alpha", "graphs algorithms")],
            &Normalizer::default(),
        )
        .unwrap()
    }

    #[test]
    fn journal_table_sorted_and_validated() {
        let t = two_journals();
        assert_eq!(t.get(0).journal_id, "J1");
        assert_eq!(t.index_of("J2"), Some(1));
        let n = Normalizer::default();
        assert!(JournalTable::new(vec![journal("J1", "a", "x"), journal("J1", "b", "y")], &n).is_err());
        assert!(JournalTable::new(vec![journal("J1", "a", "the of 42")], &n).is_err());
    }

    #[test]
    fn unknown_journal_rejected() {
        let err = CorpusSplit::new(vec![paper("p", "t", "", &[], "J99")], vec![], two_journals()).unwrap_err();
        assert_eq!(err, Error::UnknownJournal("J99".into()));
    }

    #[test]
    fn pair_dataset_shares_scopes_and_skips_empty() {
        let train = vec![
            paper("a", "graph coloring", "", &[], "J1"),
            paper("b", "laser cavity", "", &[], "J2"),
            paper("c", "", "spectral graph", &["planar"], "J1"),
        ];
        let split = CorpusSplit::new(train, vec![], two_journals()).unwrap();
        let n = Normalizer::default();
        let d = build_pair_dataset(&n, &split).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.skipped, 0);
        assert_eq!(d.pairs[0].1, d.pairs[2].1);
        assert_ne!(d.pairs[0].1, d.pairs[1].1);
        assert_eq!(d.pairs[2].0, "spectral graph planar");

        let train = vec![paper("a", "graph", "", &[], "J1"), paper("z", "The", "of 2021", &["!!"], "J2")];
        let split = CorpusSplit::new(train, vec![], two_journals()).unwrap();
        let d = build_pair_dataset(&n, &split).unwrap();
        assert_eq!((d.len(), d.skipped), (1, 1));
    }

    #[test]
    fn hash_split_is_stable() {
        // frozen values: the split must never drift between releases
        assert_eq!(fnv1a64(b"p1") % 100, 62);
        let sides: Vec<_> = (0..1000).map(|i| hash_split(&alloc::format!("paper-{i}"))).collect();
        let train = sides.iter().filter(|s| **s == SplitSide::Train).count();
        assert!((760..=840).contains(&train), "train share {train}");
    }

    proptest! {
        #[test]
        fn pairs_plus_skips_is_train_size(titles in proptest::collection::vec("[A-Za-z0-9 ]{0,12}", 1..20)) {
            let train: Vec<_> = titles
                .iter()
                .enumerate()
                .map(|(i, t)| paper(&alloc::format!("p{i}"), t, "", &[], if i % 2 == 0 { "J1" } else { "J2" }))
                .collect();
            let n = train.len();
            let split = CorpusSplit::new(train, vec![], two_journals()).unwrap();
            let d = build_pair_dataset(&Normalizer::default(), &split).unwrap();
            prop_assert_eq!(d.len() + d.skipped, n);
        }

        #[test]
        fn composed_text_is_clean(title in "\\PC{0,30}", abs in "\\PC{0,40}", kw in proptest::collection::vec("\\PC{0,8}", 0..4)) {
            let n = Normalizer::default();
            let kws: Vec<&str> = kw.iter().map(String::as_str).collect();
            let r = paper("p", &title, &abs, &kws, "J1");
            if let Ok(text) = compose_features(&n, &r, FeatureCombo::TAK) {
                for token in text.split(' ') {
                    prop_assert!(!token.is_empty());
                    prop_assert!(token.chars().all(|c| c.is_alphabetic() && !c.is_uppercase()));
                    prop_assert!(!n.is_stopword(token));
                }
                prop_assert!(!text.contains("://"));
            }
        }
    }
}
