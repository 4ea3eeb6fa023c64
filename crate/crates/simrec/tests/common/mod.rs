#![allow(dead_code)]

use simrec::config::Config;
use simrec::pipeline::{finetune_stage, train_stage};
use simrec_core::corpus::{CorpusSplit, FeatureCombo, JournalTable};
use simrec_core::recommender::TrainedModel;
use simrec_core::synthetic::{generate, SyntheticSpec};
use simrec_core::text::Normalizer;

/// Small, quick settings; enough to separate the synthetic journals.
pub fn small_config() -> Config {
    let mut c = Config::default();
    c.encoder.layers = 1;
    c.encoder.model_dim = 16;
    c.encoder.ff_dim = 32;
    c.encoder.max_len = 40;
    c.contrastive.epochs = 2;
    c.contrastive.batch_size = 16;
    c.head.hidden = 16;
    c.head.epochs = 12;
    c.head.batch_size = 16;
    c.head.learning_rate = 5e-3;
    c.with_seed(Some(3))
}

pub fn synthetic_split(docs: usize) -> (CorpusSplit, Normalizer) {
    let n = Normalizer::default();
    let syn = generate(&SyntheticSpec { docs_per_journal: docs, ..Default::default() });
    let table = JournalTable::new(syn.journals, &n).unwrap();
    (CorpusSplit::by_hash(syn.papers, table).unwrap(), n)
}

/// The fixture model: fine-tuned encoder plus a head for `combo`.
pub fn fixture_model(combo: FeatureCombo) -> (TrainedModel, CorpusSplit, Normalizer) {
    let cfg = small_config();
    let (split, n) = synthetic_split(10);
    let enc = finetune_stage(&cfg, &split, &n).unwrap().encoder;
    let model = train_stage(&cfg, enc, &split, combo, &n, None).unwrap();
    (model, split, n)
}
