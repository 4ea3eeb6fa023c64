//! Record-per-line JSON corpus files.
//!
//! * papers: `{"id", "title", "abstract", "keywords": [..], "journal_id"}`
//! * journals: `{"journal_id", "name", "scope_text"}`
//! * split (optional): `{"id", "split": "train" | "test"}`

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use simrec_core::corpus::{CorpusSplit, JournalProfile, JournalTable, PaperRecord, SplitSide};
use simrec_core::text::{parse_stopword_list, Normalizer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub id: String,
    pub split: SplitSide,
}

/// Parses one JSON object per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Default normalizer, extended with an optional stop-word file
/// (one token per line, `#` comments).
pub fn load_normalizer(extra_stopwords: Option<&Path>) -> Result<Normalizer> {
    let mut n = Normalizer::default();
    if let Some(path) = extra_stopwords {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        n.extend_stopwords(parse_stopword_list(&text));
    }
    Ok(n)
}

pub fn load_journals(path: &Path, normalizer: &Normalizer) -> Result<JournalTable> {
    let journals: Vec<JournalProfile> = read_jsonl(path)?;
    Ok(JournalTable::new(journals, normalizer)?)
}

/// Loads papers and journals. With a split file, listed ids go where the
/// file says and unlisted papers go to the test side; without one, the
/// deterministic 80/20 id hash decides.
pub fn load_corpus(
    papers_path: &Path,
    journals_path: &Path,
    split_path: Option<&Path>,
    normalizer: &Normalizer,
) -> Result<CorpusSplit> {
    let journals = load_journals(journals_path, normalizer)?;
    let papers: Vec<PaperRecord> = read_jsonl(papers_path)?;
    if let Some(missing) = papers.iter().find(|p| journals.index_of(&p.journal_id).is_none()) {
        return Err(Error::UnknownJournal(missing.journal_id.clone()));
    }
    let split = match split_path {
        None => CorpusSplit::by_hash(papers, journals)?,
        Some(path) => {
            let entries: Vec<SplitEntry> = read_jsonl(path)?;
            let sides: HashMap<&str, SplitSide> = entries.iter().map(|e| (e.id.as_str(), e.split)).collect();
            if let Some(unknown) = entries.iter().find(|e| !papers.iter().any(|p| p.id == e.id)) {
                return Err(Error::UnknownPaper(unknown.id.clone()));
            }
            let (train, test) = papers
                .into_iter()
                .partition(|p| sides.get(p.id.as_str()).copied().unwrap_or(SplitSide::Test) == SplitSide::Train);
            CorpusSplit::new(train, test, journals)?
        }
    };
    Ok(split)
}

/// Reads a directory written by `prepare`: `train.jsonl`, `test.jsonl`
/// and `journals.jsonl`.
pub fn load_prepared(dir: &Path, normalizer: &Normalizer) -> Result<CorpusSplit> {
    let journals = load_journals(&dir.join("journals.jsonl"), normalizer)?;
    let train: Vec<PaperRecord> = read_jsonl(&dir.join("train.jsonl"))?;
    let test: Vec<PaperRecord> = read_jsonl(&dir.join("test.jsonl"))?;
    if let Some(missing) = train.iter().chain(&test).find(|p| journals.index_of(&p.journal_id).is_none()) {
        return Err(Error::UnknownJournal(missing.journal_id.clone()));
    }
    Ok(CorpusSplit::new(train, test, journals)?)
}

/// Split file listing every record of `split`.
pub fn split_entries(split: &CorpusSplit) -> Vec<SplitEntry> {
    split
        .train
        .iter()
        .map(|p| SplitEntry { id: p.id.clone(), split: SplitSide::Train })
        .chain(split.test.iter().map(|p| SplitEntry { id: p.id.clone(), split: SplitSide::Test }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    const JOURNALS: &str = r#"{"journal_id":"J1","name":"Graphs","scope_text":"graph theory and algorithms"}
{"journal_id":"J2","name":"Optics","scope_text":"lasers photonics optics"}
"#;

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let j = write(dir.path(), "j.jsonl", JOURNALS);
        let p = write(
            dir.path(),
            "p.jsonl",
            "{\"id\":\"a\",\"title\":\"t\",\"abstract\":\"\",\"keywords\":[],\"journal_id\":\"J1\"}\n\n{\"id\":\"b\",\"title\":\"t\"}\n",
        );
        let err = load_corpus(&p, &j, None, &Normalizer::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 3, .. }), "{err}");
    }

    #[test]
    fn split_file_unknown_paper() {
        let dir = tempfile::tempdir().unwrap();
        let j = write(dir.path(), "j.jsonl", JOURNALS);
        let p = write(
            dir.path(),
            "p.jsonl",
            "{\"id\":\"a\",\"title\":\"graph\",\"abstract\":\"\",\"keywords\":[],\"journal_id\":\"J1\"}\n",
        );
        let s = write(dir.path(), "s.jsonl", "{\"id\":\"zz\",\"split\":\"train\"}\n");
        let err = load_corpus(&p, &j, Some(&s), &Normalizer::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownPaper(ref id) if id == "zz"));
    }

    #[test]
    fn extra_stopwords_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "extra.txt", "# ours\nnovel\n");
        let n = load_normalizer(Some(&f)).unwrap();
        assert_eq!(n.normalize("A novel graph method"), "graph method");
    }
}
