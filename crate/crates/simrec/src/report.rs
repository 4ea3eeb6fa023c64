use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simrec_core::corpus::FeatureCombo;
use simrec_core::eval::{format_table, EvalReport, EvalRow, ReportMetadata};

use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyByK {
    #[serde(rename = "1")]
    pub top1: f64,
    #[serde(rename = "3")]
    pub top3: f64,
    #[serde(rename = "5")]
    pub top5: f64,
    #[serde(rename = "10")]
    pub top10: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetadataLine {
    pub dataset_hash: String,
    pub model_hash: String,
    pub seed: u64,
    pub timestamp: Option<String>,
}

/// One line of the machine-readable report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub combo: FeatureCombo,
    pub accuracy: AccuracyByK,
    pub train_size: usize,
    pub test_size: usize,
    pub skipped: usize,
    pub metadata: MetadataLine,
}

impl ReportLine {
    fn new(row: &EvalRow, meta: &ReportMetadata) -> Self {
        let [top1, top3, top5, top10] = row.accuracy;
        Self {
            combo: row.combo,
            accuracy: AccuracyByK { top1, top3, top5, top10 },
            train_size: row.train_size,
            test_size: row.test_size,
            skipped: row.skipped,
            metadata: MetadataLine {
                dataset_hash: meta.dataset_hash.clone(),
                model_hash: row.model_hash.clone(),
                seed: meta.seed,
                timestamp: meta.timestamp.clone(),
            },
        }
    }

    pub fn accuracy(&self) -> [f64; 4] {
        let a = self.accuracy;
        [a.top1, a.top3, a.top5, a.top10]
    }
}

/// Path of the text table written next to a report.
pub fn table_path(report_path: &Path) -> PathBuf {
    report_path.with_extension("txt")
}

/// Writes `path` (one JSON object per row) and the fixed-width table
/// beside it, both in report order.
pub fn export_report(report: &EvalReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let lines: Vec<ReportLine> = report.ordered_rows().into_iter().map(|r| ReportLine::new(r, &report.metadata)).collect();
    write_jsonl(path, &lines)?;
    let table = table_path(path);
    std::fs::write(&table, format_table(report)).map_err(|e| Error::io(&table, e))
}

pub fn read_report(path: &Path) -> Result<Vec<ReportLine>> {
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(combo: FeatureCombo, a: f64) -> EvalRow {
        EvalRow {
            combo,
            accuracy: [a, a, 1.0, 1.0],
            model_hash: format!("m{}", combo.code()),
            train_size: 8,
            test_size: 2,
            skipped: 0,
        }
    }

    #[test]
    fn full_sweep_in_canonical_order_and_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut combos = FeatureCombo::all();
        combos.reverse();
        let report = EvalReport {
            rows: combos.iter().map(|&c| row(c, 0.5)).collect(),
            metadata: ReportMetadata { dataset_hash: "d".into(), seed: 1, timestamp: None },
        };
        let path = dir.path().join("r.jsonl");
        export_report(&report, &path).unwrap();
        let lines = read_report(&path).unwrap();
        let order: Vec<FeatureCombo> = lines.iter().map(|l| l.combo).collect();
        assert_eq!(order, FeatureCombo::all());
        let table = std::fs::read_to_string(table_path(&path)).unwrap();
        assert_eq!(table.lines().count(), 15);

        let first = std::fs::read(&path).unwrap();
        export_report(&report, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        export_report(&EvalReport::default(), &path).unwrap();
        assert!(read_report(&path).unwrap().is_empty());
        let table = std::fs::read_to_string(table_path(&path)).unwrap();
        assert_eq!(table.lines().count(), 1);
        assert!(table.starts_with("Combo"));
    }
}
