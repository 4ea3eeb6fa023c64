//! Accuracy@K and the feature-combination sweep.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::corpus::{CorpusSplit, FeatureCombo};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::recommender::{train_downstream, HeadConfig, RankedRecommendations, TrainedModel};
use crate::text::Normalizer;

/// Cut-offs reported for every combination.
pub const REPORT_KS: [usize; 4] = [1, 3, 5, 10];

/// Fraction of samples whose true journal is among the first `k` ranked items.
///
/// Each ranking must hold at least `min(k, J)` items.
pub fn accuracy_at_k(rankings: &[RankedRecommendations], labels: &[usize], k: usize) -> Result<f64> {
    if rankings.len() != labels.len() {
        return Err(Error::LengthMismatch { left: rankings.len(), right: labels.len() });
    }
    if rankings.is_empty() {
        return Err(Error::EmptyInput("rankings"));
    }
    let mut hits = 0usize;
    for (r, &label) in rankings.iter().zip(labels) {
        if r.items.iter().take(k).any(|item| item.journal == label) {
            hits += 1;
        }
    }
    Ok(hits as f64 / rankings.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub combo: FeatureCombo,
    /// Accuracy at each of [`REPORT_KS`].
    pub accuracy: [f64; 4],
    pub model_hash: String,
    pub train_size: usize,
    pub test_size: usize,
    pub skipped: usize,
}

impl EvalRow {
    /// Accuracy must not decrease as K grows.
    pub fn is_monotone(&self) -> bool {
        self.accuracy.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportMetadata {
    pub dataset_hash: String,
    pub seed: u64,
    /// Supplied by the caller; `None` keeps reports byte-reproducible.
    pub timestamp: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub metadata: ReportMetadata,
}

impl EvalReport {
    /// Rows in report order (T, TS, K, KS, A, AS, TK, TKS, TA, TAS, AK, AKS, TAK, TAKS).
    pub fn ordered_rows(&self) -> Vec<&EvalRow> {
        let mut rows: Vec<&EvalRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.combo.report_rank());
        rows
    }

    pub fn row(&self, combo: FeatureCombo) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.combo == combo)
    }
}

/// Fixed-width text table in report order.
pub fn format_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<8}{:>10}{:>10}{:>10}{:>10}", "Combo", "Top 1", "Top 3", "Top 5", "Top 10");
    for row in report.ordered_rows() {
        let _ = write!(out, "{:<8}", row.combo.code());
        for a in row.accuracy {
            let _ = write!(out, "{a:>10.4}");
        }
        out.push('\n');
    }
    out
}

/// Accuracy at every [`REPORT_KS`] cut-off on `split.test`.
pub fn evaluate_model(model: &TrainedModel, split: &CorpusSplit, normalizer: &Normalizer) -> Result<[f64; 4]> {
    let k_max = REPORT_KS[REPORT_KS.len() - 1];
    let rankings = model.rank_records(normalizer, &split.test, k_max)?;
    let labels: Vec<usize> = split.test.iter().map(|r| split.label(r)).collect();
    let mut acc = [0.0; 4];
    for (slot, &k) in acc.iter_mut().zip(&REPORT_KS) {
        *slot = accuracy_at_k(&rankings, &labels, k)?;
    }
    Ok(acc)
}

#[derive(Debug)]
pub struct SweepFailure {
    pub combo: FeatureCombo,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub report: EvalReport,
    pub failures: Vec<SweepFailure>,
}

/// Trains and evaluates one model per combination, in the order given.
/// A failing combination is recorded and the sweep moves on.
pub fn run_sweep(
    encoder: &Encoder,
    split: &CorpusSplit,
    combos: &[FeatureCombo],
    config: &HeadConfig,
    normalizer: &Normalizer,
    recorded_journals: Option<&str>,
) -> SweepOutcome {
    let mut out = SweepOutcome {
        report: EvalReport {
            rows: Vec::new(),
            metadata: ReportMetadata { dataset_hash: split.fingerprint(), seed: config.seed, timestamp: None },
        },
        failures: Vec::new(),
    };
    for &combo in combos {
        let result = train_downstream(encoder.clone(), split, combo, config, normalizer, recorded_journals)
            .and_then(|model| {
                let accuracy = evaluate_model(&model, split, normalizer)?;
                Ok(EvalRow {
                    combo,
                    accuracy,
                    model_hash: model.fingerprint(),
                    train_size: split.train.len(),
                    test_size: split.test.len(),
                    skipped: model.skipped,
                })
            });
        match result {
            Ok(row) => out.report.rows.push(row),
            Err(error) => out.failures.push(SweepFailure { combo, error }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommender::{rank_scores, RankedItem};
    use alloc::vec;

    fn ranking(journals: &[usize]) -> RankedRecommendations {
        RankedRecommendations {
            items: journals.iter().map(|&j| RankedItem { journal: j, score: 0.0 }).collect(),
            k: journals.len(),
        }
    }

    #[test]
    fn hand_enumerated() {
        let r = vec![ranking(&[0, 1, 2, 3]), ranking(&[1, 0, 3, 2]), ranking(&[3, 2, 1, 0]), ranking(&[2, 3, 0, 1])];
        // labels sit at rank 3, 1, 4, 4
        let labels = [2, 1, 0, 1];
        assert_eq!(accuracy_at_k(&r, &labels, 3).unwrap(), 0.5);
        assert_eq!(accuracy_at_k(&r, &labels, 1).unwrap(), 0.25);
        assert_eq!(accuracy_at_k(&r, &labels, 4).unwrap(), 1.0);
        assert_eq!(accuracy_at_k(&r, &labels, 10).unwrap(), 1.0);
    }

    #[test]
    fn perfect_predictor_and_errors() {
        let r = vec![ranking(&[1, 0]), ranking(&[0, 1])];
        assert_eq!(accuracy_at_k(&r, &[1, 0], 1).unwrap(), 1.0);
        assert_eq!(accuracy_at_k(&r, &[1], 1), Err(Error::LengthMismatch { left: 2, right: 1 }));
        let full = vec![rank_scores(&[0.1, 0.2, 0.7], 3)];
        assert_eq!(accuracy_at_k(&full, &[0], 10).unwrap(), 1.0);
    }

    #[test]
    fn table_layout() {
        let row = |c: &str, a| EvalRow {
            combo: c.parse().unwrap(),
            accuracy: [a, 0.8, 0.9, 1.0],
            model_hash: String::new(),
            train_size: 0,
            test_size: 0,
            skipped: 0,
        };
        let report = EvalReport { rows: vec![row("TAKS", 0.5), row("T", 0.25)], metadata: ReportMetadata::default() };
        let table = format_table(&report);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("T "));
        assert!(lines[2].starts_with("TAKS"));
        assert!(lines[2].contains("0.5000"));
        assert_eq!(format_table(&EvalReport::default()).lines().count(), 1);
    }
}
