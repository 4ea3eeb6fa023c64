//! The stages behind the CLI commands, callable from code.

use log::warn;
use simrec_core::contrastive::{finetune, FinetuneOutcome, TrainingWarning};
use simrec_core::corpus::{build_pair_dataset, CorpusSplit, FeatureCombo, PaperRecord};
use simrec_core::encoder::{Encoder, Vocabulary};
use simrec_core::eval::{run_sweep, SweepOutcome};
use simrec_core::recommender::{train_downstream, TrainedModel};
use simrec_core::text::Normalizer;

use crate::config::Config;
use crate::error::Result;

/// Vocabulary over every training pair (paper text and scope text).
pub fn build_vocabulary(config: &Config, split: &CorpusSplit, normalizer: &Normalizer) -> Result<Vocabulary> {
    let pairs = build_pair_dataset(normalizer, split)?;
    let mut texts: Vec<&str> = Vec::with_capacity(2 * pairs.len());
    for (x, s) in &pairs.pairs {
        texts.push(x);
        texts.push(s);
    }
    let scopes = split.journals.scope_texts(normalizer);
    texts.extend(scopes.iter().map(String::as_str));
    Ok(Vocabulary::build(&texts, config.encoder.vocab_min_count, config.encoder.vocab_max_size))
}

/// Fresh toy encoder fine-tuned contrastively on the training split.
pub fn finetune_stage(config: &Config, split: &CorpusSplit, normalizer: &Normalizer) -> Result<FinetuneOutcome> {
    let vocab = build_vocabulary(config, split, normalizer)?;
    let encoder = Encoder::new(config.encoder.spec(), vocab, config.encoder.seed)?;
    let pairs = build_pair_dataset(normalizer, split)?;
    if pairs.skipped > 0 {
        warn!("{} training records have no usable text and were skipped", pairs.skipped);
    }
    let outcome = finetune(encoder, &pairs, &config.contrastive)?;
    for w in &outcome.warnings {
        match w {
            TrainingWarning::DegenerateBatch { count } => {
                warn!("{count} single-pair batches had no negatives (loss 0)")
            }
        }
    }
    Ok(outcome)
}

pub fn train_stage(
    config: &Config,
    encoder: Encoder,
    split: &CorpusSplit,
    combo: FeatureCombo,
    normalizer: &Normalizer,
    recorded_journals: Option<&str>,
) -> Result<TrainedModel> {
    let model = train_downstream(encoder, split, combo, &config.head, normalizer, recorded_journals)?;
    if model.skipped > 0 {
        warn!("{combo}: {} training records have no text for this combination", model.skipped);
    }
    Ok(model)
}

pub fn sweep_stage(
    config: &Config,
    encoder: &Encoder,
    split: &CorpusSplit,
    combos: &[FeatureCombo],
    normalizer: &Normalizer,
    recorded_journals: Option<&str>,
) -> SweepOutcome {
    let out = run_sweep(encoder, split, combos, &config.head, normalizer, recorded_journals);
    for f in &out.failures {
        warn!("{}: {} ({})", f.combo, f.error.name(), f.error);
    }
    out
}

/// Record with each field normalized; keywords that normalize away are dropped.
pub fn normalize_record(normalizer: &Normalizer, record: &PaperRecord) -> PaperRecord {
    PaperRecord {
        id: record.id.clone(),
        title: normalizer.normalize(&record.title),
        abstract_text: normalizer.normalize(&record.abstract_text),
        keywords: record.keywords.iter().map(|k| normalizer.normalize(k)).filter(|k| !k.is_empty()).collect(),
        journal_id: record.journal_id.clone(),
    }
}

/// Parses `T,TA,TAKS`-style lists.
pub fn parse_combos(list: &str) -> std::result::Result<Vec<FeatureCombo>, String> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| s.parse().map_err(|e| format!("{s}: {e}"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use simrec_core::corpus::{compose_features, paper};

    #[test]
    fn normalized_record_composes_identically() {
        let n = Normalizer::default();
        let r = paper("p", "The Graph of Things!", "See www.x.org for 3 results", &["Deep Learning 101", "???"], "J1");
        let nr = normalize_record(&n, &r);
        assert_eq!(nr.keywords, vec!["deep learning".to_string()]);
        for combo in FeatureCombo::all() {
            assert_eq!(compose_features(&n, &nr, combo).ok(), compose_features(&n, &r, combo).ok(), "{combo}");
        }
    }

    #[test]
    fn combo_list() {
        assert_eq!(parse_combos("TAK, TAKS").unwrap(), vec![FeatureCombo::TAK, FeatureCombo::TAKS]);
        assert!(parse_combos("TAKX").is_err());
    }
}
