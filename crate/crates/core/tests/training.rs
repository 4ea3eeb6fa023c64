use simrec_core::contrastive::{finetune, ContrastiveConfig, TrainingWarning};
use simrec_core::corpus::{build_pair_dataset, CorpusSplit, FeatureCombo, JournalTable, PairDataset};
use simrec_core::encoder::{Encoder, EncoderSpec, ToyConfig, Vocabulary};
use simrec_core::recommender::{train_downstream, HeadConfig};
use simrec_core::synthetic::{generate, SyntheticSpec};
use simrec_core::text::Normalizer;
use simrec_core::Error;

fn corpus(docs: usize) -> (CorpusSplit, Normalizer) {
    let n = Normalizer::default();
    let syn = generate(&SyntheticSpec { docs_per_journal: docs, ..Default::default() });
    let table = JournalTable::new(syn.journals, &n).unwrap();
    (CorpusSplit::by_hash(syn.papers, table).unwrap(), n)
}

fn encoder_for(pairs: &PairDataset) -> Encoder {
    let texts: Vec<&str> = pairs.pairs.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
    let vocab = Vocabulary::build(&texts, 1, 4096);
    let spec = EncoderSpec::toy(ToyConfig { layers: 1, heads: 2, model_dim: 16, ff_dim: 32, vocab_size: 0, max_len: 40 });
    Encoder::new(spec, vocab, 1).unwrap()
}

fn contrastive(epochs: usize, batch_size: usize) -> ContrastiveConfig {
    ContrastiveConfig { epochs, batch_size, ..Default::default() }
}

#[test]
fn finetune_lowers_loss_and_is_reproducible() {
    let (split, n) = corpus(10);
    let mut pairs = build_pair_dataset(&n, &split).unwrap();
    pairs.pairs.truncate(64);
    assert_eq!(pairs.len(), 64);
    let cfg = contrastive(3, 16);
    let a = finetune(encoder_for(&pairs), &pairs, &cfg).unwrap();
    let means = a.epoch_means();
    assert_eq!(means.len(), 3);
    assert!(means[2] < means[0], "{means:?}");
    assert_eq!(a.log.len(), 3 * 4);

    let b = finetune(encoder_for(&pairs), &pairs, &cfg).unwrap();
    let bits = |log: &[simrec_core::contrastive::LossRecord]| log.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.log), bits(&b.log));
    assert_eq!(a.encoder.fingerprint(), b.encoder.fingerprint());
}

#[test]
fn single_pair_batches_are_degenerate() {
    let (split, n) = corpus(2);
    let pairs = build_pair_dataset(&n, &split).unwrap();
    let out = finetune(encoder_for(&pairs), &pairs, &contrastive(1, 1)).unwrap();
    assert!(out.log.iter().all(|r| r.loss == 0.0));
    assert_eq!(out.warnings, vec![TrainingWarning::DegenerateBatch { count: pairs.len() }]);
}

fn head_config() -> HeadConfig {
    HeadConfig { hidden: 16, epochs: 15, batch_size: 16, learning_rate: 5e-3, ..Default::default() }
}

#[test]
fn downstream_training_learns_and_repeats() {
    let (split, n) = corpus(25);
    let pairs = build_pair_dataset(&n, &split).unwrap();
    let enc = encoder_for(&pairs);
    for combo in [FeatureCombo::TAK, FeatureCombo::TAKS] {
        let a = train_downstream(enc.clone(), &split, combo, &head_config(), &n, None).unwrap();
        assert_eq!(a.head.uses_scopes(), combo.use_scopes);
        assert_eq!(a.scope_table().is_some(), combo.use_scopes);
        let means = simrec_core::contrastive::epoch_means(&a.log);
        let last = *means.last().unwrap();
        assert!(last < 8f64.ln(), "{combo}: final epoch loss {last}");
        let b = train_downstream(enc.clone(), &split, combo, &head_config(), &n, None).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
    }
}

#[test]
fn frozen_encoder_is_untouched() {
    let (split, n) = corpus(5);
    let pairs = build_pair_dataset(&n, &split).unwrap();
    let enc = encoder_for(&pairs);
    let cfg = HeadConfig { freeze_encoder: true, ..head_config() };
    let m = train_downstream(enc.clone(), &split, FeatureCombo::TAKS, &cfg, &n, None).unwrap();
    assert_eq!(m.encoder.fingerprint(), enc.fingerprint());
}

#[test]
fn journal_table_must_match_the_encoder() {
    let (split, n) = corpus(3);
    let pairs = build_pair_dataset(&n, &split).unwrap();
    let err = train_downstream(encoder_for(&pairs), &split, FeatureCombo::TAK, &head_config(), &n, Some("0000000000000000"))
        .unwrap_err();
    assert_eq!(err, Error::ComboJournalMismatch);
}
