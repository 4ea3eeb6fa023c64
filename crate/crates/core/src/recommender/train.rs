use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::Tape;
use crate::contrastive::LossRecord;
use crate::corpus::{compose_features, CorpusSplit, FeatureCombo, JournalTable};
use crate::encoder::{Encoder, TokenizedBatch};
use crate::error::{Error, Result};
use crate::hash::Fnv64;
use crate::linalg::Matrix;
use crate::optim::{AdamW, AdamWConfig, WarmupSchedule};
use crate::text::Normalizer;

use super::heads::{ForwardMode, Head, HeadPParams, HeadPSParams};
use super::rank::{recommend_top_k, RankedRecommendations};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HeadConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    /// Encoder learning rate as a fraction of the head's.
    pub encoder_lr_scale: f64,
    pub freeze_encoder: bool,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            dropout: 0.1,
            epochs: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            warmup_fraction: 0.1,
            encoder_lr_scale: 0.1,
            freeze_encoder: false,
            seed: 42,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("hidden, epochs and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) || !(self.encoder_lr_scale >= 0.0) {
            return Err(Error::InvalidConfig("learning rates must be positive, decay non-negative".into()));
        }
        Ok(())
    }
}

/// Encoder + trained head + everything needed to serve predictions.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub encoder: Encoder,
    pub head: Head,
    pub combo: FeatureCombo,
    pub journals: JournalTable,
    pub seed: u64,
    /// Per-step training loss.
    pub log: Vec<LossRecord>,
    /// Training records dropped because the combo's fields were all empty.
    pub skipped: usize,
    scope_table: Option<Matrix>,
}

impl TrainedModel {
    /// Assembles a model from stored parts and recomputes the scope table.
    pub fn from_parts(
        encoder: Encoder,
        head: Head,
        combo: FeatureCombo,
        journals: JournalTable,
        seed: u64,
        normalizer: &Normalizer,
    ) -> Result<Self> {
        head.check()?;
        if head.uses_scopes() != combo.use_scopes {
            return Err(Error::InvalidConfig(alloc::format!("head kind {} does not match combo {combo}", head.kind())));
        }
        let (d, _, j) = head.dims();
        if d != encoder.output_dim() || j != journals.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "head expects d={d}, J={j}; encoder gives {} and table has {}",
                encoder.output_dim(),
                journals.len()
            )));
        }
        let scope_table = if combo.use_scopes {
            Some(encoder.encode_texts(&journals.scope_texts(normalizer))?)
        } else {
            None
        };
        Ok(Self { encoder, head, combo, journals, seed, log: Vec::new(), skipped: 0, scope_table })
    }

    pub fn scope_table(&self) -> Option<&Matrix> {
        self.scope_table.as_ref()
    }

    /// Content hash over encoder, head weights, combo and journal table.
    pub fn fingerprint(&self) -> String {
        let mut h = Fnv64::new();
        h.write(self.encoder.fingerprint().as_bytes());
        h.write(self.combo.code().as_bytes());
        h.write(self.journals.fingerprint().as_bytes());
        for p in self.head.params() {
            h.write_f64s(p.as_slice());
        }
        h.hex()
    }

    /// Probabilities for already-composed texts, one row per text.
    pub fn predict_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Matrix> {
        let emb = self.encoder.encode_texts(texts)?;
        self.head.predict(&emb, self.scope_table.as_ref(), ForwardMode::Eval)
    }

    /// Text fed to the encoder for a record: the composed fields, or the
    /// empty string when they all normalize away.
    pub fn compose(&self, normalizer: &Normalizer, record: &crate::corpus::PaperRecord) -> String {
        compose_features(normalizer, record, self.combo).unwrap_or_default()
    }

    /// Rankings truncated at `k` for each record.
    pub fn rank_records(
        &self,
        normalizer: &Normalizer,
        records: &[crate::corpus::PaperRecord],
        k: usize,
    ) -> Result<Vec<RankedRecommendations>> {
        let texts: Vec<String> = records.iter().map(|r| self.compose(normalizer, r)).collect();
        let probs = self.predict_texts(&texts)?;
        Ok((0..probs.rows()).map(|r| recommend_top_k(probs.row(r), k)).collect())
    }
}

fn encode_all(encoder: &Encoder, tokens: &TokenizedBatch) -> Result<Matrix> {
    let d = encoder.output_dim();
    let mut data = Vec::with_capacity(tokens.rows() * d);
    let idx: Vec<usize> = (0..tokens.rows()).collect();
    for chunk in idx.chunks(64) {
        data.extend(encoder.encode(&tokens.select(chunk))?.into_vec());
    }
    Ok(Matrix::from_vec(tokens.rows(), d, data))
}

/// Trains the head selected by `combo` (paper head without scopes, scope
/// head with) with cross-entropy against the true journal.
///
/// `recorded_journals` is the journal-table fingerprint stored with the
/// encoder, if any; a different table is rejected.
pub fn train_downstream(
    mut encoder: Encoder,
    split: &CorpusSplit,
    combo: FeatureCombo,
    config: &HeadConfig,
    normalizer: &Normalizer,
    recorded_journals: Option<&str>,
) -> Result<TrainedModel> {
    config.validate()?;
    if let Some(fp) = recorded_journals {
        if fp != split.journals.fingerprint() {
            return Err(Error::ComboJournalMismatch);
        }
    }
    let mut texts = Vec::with_capacity(split.train.len());
    let mut labels = Vec::with_capacity(split.train.len());
    let mut skipped = 0;
    for record in &split.train {
        match compose_features(normalizer, record, combo) {
            Ok(t) => {
                texts.push(t);
                labels.push(split.label(record));
            }
            Err(Error::AllFieldsEmpty) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if texts.is_empty() {
        return Err(Error::EmptyInput("training split after composition"));
    }

    let journals = split.journals.clone();
    let d = encoder.output_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut head = if combo.use_scopes {
        Head::PaperScopes(HeadPSParams::init(&mut rng, d, config.hidden, journals.len(), config.dropout))
    } else {
        Head::Paper(HeadPParams::init(&mut rng, d, config.hidden, journals.len(), config.dropout))
    };

    let max_len = encoder.max_len();
    let tokens = encoder.tokenize(&texts, max_len);
    let scope_texts = journals.scope_texts(normalizer);
    let train_encoder = !config.freeze_encoder && config.encoder_lr_scale > 0.0;
    let frozen_embeddings = if train_encoder { None } else { Some(encode_all(&encoder, &tokens)?) };

    let n_enc = encoder.weights().len();
    let mut scales: Vec<f64> = alloc::vec![if train_encoder { config.encoder_lr_scale } else { 0.0 }; n_enc];
    scales.extend(core::iter::repeat_n(1.0, head.params().len()));
    let shapes: Vec<(usize, usize)> = encoder
        .weights()
        .iter()
        .map(Matrix::shape)
        .chain(head.params().into_iter().map(Matrix::shape))
        .collect();
    let mut opt = AdamW::new(AdamWConfig::new(config.learning_rate, config.weight_decay), shapes);

    let steps_per_epoch = texts.len().div_ceil(config.batch_size);
    let schedule = WarmupSchedule::from_fraction(steps_per_epoch * config.epochs, config.warmup_fraction);
    let mut order: Vec<usize> = (0..texts.len()).collect();
    let mut log = Vec::new();
    let mut step = 0;
    let mut scope_table = None;

    for epoch in 0..config.epochs {
        // refreshed once per epoch: exact for a frozen encoder, one epoch stale otherwise
        if combo.use_scopes && (train_encoder || scope_table.is_none()) {
            scope_table = Some(encoder.encode_texts(&scope_texts)?);
        }
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let enc_vars = if train_encoder { encoder.bind(&mut tape, true) } else { Vec::new() };
            let emb = match &frozen_embeddings {
                Some(all) => tape.constant(all.select_rows(batch)),
                None => encoder.forward(&mut tape, &enc_vars, &tokens.select(batch))?,
            };
            let scopes = scope_table.as_ref().map(|s| tape.constant(s.clone()));
            let head_vars = head.bind(&mut tape, true);
            let logits = head.logits(&mut tape, &head_vars, emb, scopes, ForwardMode::Train(&mut rng))?;
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let loss_var = tape.softmax_cross_entropy(logits, &batch_labels);
            let loss = tape.value(loss_var).get(0, 0);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            let grads = tape.backward(loss_var);
            let mut all_grads: Vec<Matrix> = Vec::with_capacity(scales.len());
            for (i, w) in encoder.weights().iter().enumerate() {
                all_grads.push(match enc_vars.get(i) {
                    Some(&v) => grads.get_or_zeros(v, w.shape()),
                    None => Matrix::zeros(w.rows(), w.cols()),
                });
            }
            for (&v, p) in head_vars.iter().zip(head.params()) {
                all_grads.push(grads.get_or_zeros(v, p.shape()));
            }
            let lr = config.learning_rate * schedule.factor(step);
            let mut params: Vec<&mut Matrix> = encoder.weights_mut().iter_mut().collect();
            params.extend(head.params_mut());
            opt.step(&mut params, &all_grads, lr, &scales);
            log.push(LossRecord { step, epoch, loss, learning_rate: lr });
            step += 1;
        }
    }

    let mut model = TrainedModel::from_parts(encoder, head, combo, journals, config.seed, normalizer)?;
    model.log = log;
    model.skipped = skipped;
    Ok(model)
}
