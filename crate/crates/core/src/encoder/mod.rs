//! Sentence encoders with first-token pooling.
//!
//! Two kinds are described by [`EncoderSpec`]: the in-crate toy transformer,
//! which this crate can run and train, and an adapter for an externally
//! provided pretrained model identified by name. The adapter is recorded in
//! artifacts but has no in-crate backend.

mod tokenizer;
mod transformer;

pub use tokenizer::{TokenizedBatch, Vocabulary, CLS_ID, PAD_ID, SPECIAL_TOKENS, UNK_ID};
pub use transformer::{ToyConfig, ToyTransformer};

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::hash::Fnv64;
use crate::linalg::Matrix;

/// Default truncation length for composed title + abstract + keyword text.
pub const DEFAULT_MAX_LEN: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum EncoderKind {
    ToyTransformer { config: ToyConfig },
    PretrainedAdapter { model_name: String, max_len: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderSpec {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: EncoderKind,
    pub output_dim: usize,
}

impl EncoderSpec {
    pub fn toy(config: ToyConfig) -> Self {
        let output_dim = config.model_dim;
        Self { kind: EncoderKind::ToyTransformer { config }, output_dim }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            EncoderKind::ToyTransformer { config } => {
                config.validate()?;
                if config.model_dim != self.output_dim {
                    return Err(Error::DimensionMismatch(alloc::format!(
                        "output_dim {} differs from model_dim {}",
                        self.output_dim,
                        config.model_dim
                    )));
                }
                Ok(())
            }
            EncoderKind::PretrainedAdapter { .. } if self.output_dim == 0 => {
                Err(Error::InvalidConfig("output_dim must be positive".into()))
            }
            EncoderKind::PretrainedAdapter { .. } => Ok(()),
        }
    }

    pub fn max_len(&self) -> usize {
        match &self.kind {
            EncoderKind::ToyTransformer { config } => config.max_len,
            EncoderKind::PretrainedAdapter { max_len, .. } => *max_len,
        }
    }
}

/// A runnable encoder: vocabulary plus transformer weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    spec: EncoderSpec,
    vocab: Vocabulary,
    model: ToyTransformer,
}

impl Encoder {
    /// Freshly initialised weights. The config's `vocab_size` is overwritten
    /// with the vocabulary's size.
    pub fn new(mut spec: EncoderSpec, vocab: Vocabulary, seed: u64) -> Result<Self> {
        let config = match &mut spec.kind {
            EncoderKind::ToyTransformer { config } => {
                config.vocab_size = vocab.len();
                config.clone()
            }
            EncoderKind::PretrainedAdapter { model_name, .. } => {
                return Err(Error::BackendUnavailable(model_name.clone()))
            }
        };
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ToyTransformer::init(config, &mut rng)?;
        Ok(Self { spec, vocab, model })
    }

    /// Reassembles an encoder from stored parts, validating consistency.
    pub fn from_parts(spec: EncoderSpec, vocab: Vocabulary, weights: Vec<Matrix>) -> Result<Self> {
        spec.validate()?;
        let config = match &spec.kind {
            EncoderKind::ToyTransformer { config } => config.clone(),
            EncoderKind::PretrainedAdapter { model_name, .. } => {
                return Err(Error::BackendUnavailable(model_name.clone()))
            }
        };
        if config.vocab_size != vocab.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "vocab_size {} but vocabulary holds {} tokens",
                config.vocab_size,
                vocab.len()
            )));
        }
        let model = ToyTransformer::from_params(config, weights)?;
        Ok(Self { spec, vocab, model })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    pub fn max_len(&self) -> usize {
        self.spec.max_len()
    }

    pub fn weights(&self) -> &[Matrix] {
        self.model.params()
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        self.model.params_mut()
    }

    pub fn weight_names(&self) -> Vec<String> {
        self.model.config().layout().into_iter().map(|(n, _)| n).collect()
    }

    /// Content hash of the vocabulary and weights.
    pub fn fingerprint(&self) -> String {
        let mut h = Fnv64::new();
        for t in self.vocab.tokens() {
            h.write(t.as_bytes()).write(&[0]);
        }
        for w in self.weights() {
            h.write_f64s(w.as_slice());
        }
        h.hex()
    }

    pub fn tokenize<S: AsRef<str>>(&self, texts: &[S], max_len: usize) -> TokenizedBatch {
        self.vocab.tokenize(texts, max_len)
    }

    /// Evaluation-mode embeddings, one row per input row.
    pub fn encode(&self, batch: &TokenizedBatch) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = self.model.bind(&mut tape, false);
        let out = self.model.forward(&mut tape, &vars, batch)?;
        Ok(tape.value(out).clone())
    }

    /// Tokenizes at the encoder's `max_len` and encodes in chunks.
    pub fn encode_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(texts.len() * self.output_dim());
        for chunk in texts.chunks(64) {
            let batch = self.tokenize(chunk, self.max_len());
            data.extend(self.encode(&batch)?.into_vec());
        }
        Ok(Matrix::from_vec(texts.len(), self.output_dim(), data))
    }

    /// Records the weights on `tape`; pass the result to [`Encoder::forward`].
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.model.bind(tape, trainable)
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], batch: &TokenizedBatch) -> Result<Var> {
        self.model.forward(tape, vars, batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_encoder(max_len: usize) -> Encoder {
        let vocab = Vocabulary::build(&["graph neural network optics laser photon"], 1, 64);
        let spec = EncoderSpec::toy(ToyConfig { layers: 2, heads: 2, model_dim: 8, ff_dim: 16, vocab_size: 0, max_len });
        Encoder::new(spec, vocab, 3).unwrap()
    }

    #[test]
    fn shape_and_duplicate_rows() {
        let enc = tiny_encoder(16);
        let b = enc.tokenize(&["graph neural", "laser photon optics", "graph neural"], 8);
        let e = enc.encode(&b).unwrap();
        assert_eq!(e.shape(), (3, 8));
        assert_eq!(e.row(0), e.row(2));
        assert_ne!(e.row(0), e.row(1));
        assert!(e.is_finite());
    }

    #[test]
    fn padding_length_invariance() {
        let enc = tiny_encoder(32);
        let text = ["graph laser unknownword network"];
        let short = enc.encode(&enc.tokenize(&text, 6)).unwrap();
        let long = enc.encode(&enc.tokenize(&text, 32)).unwrap();
        assert_eq!(short, long);
        // a longer neighbour keeps padded positions inside the computed window
        let mixed = enc.encode(&enc.tokenize(&[text[0], "graph laser network optics photon neural graph laser"], 32)).unwrap();
        assert_eq!(mixed.row(0), short.row(0));
    }

    #[test]
    fn mask_actually_matters() {
        // padding rows carry position embeddings; without the mask they would leak in
        let enc = tiny_encoder(32);
        let b = enc.tokenize(&["graph"], 32);
        let e = enc.encode(&b).unwrap();
        let mut tape = Tape::new();
        let vars = enc.bind(&mut tape, false);
        // forward with a mask that (wrongly) covers every position
        let full = enc.tokenize(&["graph [PAD] [PAD] [PAD]"], 32);
        let wrong = enc.forward(&mut tape, &vars, &full).unwrap();
        assert_ne!(tape.value(wrong), &e);
    }

    #[test]
    fn out_of_vocab_ids_rejected() {
        let enc = tiny_encoder(8);
        let other = Vocabulary::build(&["a b c d e f g h i j k l m n o p q r s t u v w x y z aa bb cc dd ee"], 1, 1000);
        let b = other.tokenize(&["ee"], 4);
        assert!(matches!(enc.encode(&b), Err(Error::DimensionMismatch(_))));
        let too_long = enc.tokenize(&["graph"], 9);
        assert!(matches!(enc.encode(&too_long), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn pretrained_adapter_has_no_backend() {
        let spec = EncoderSpec {
            kind: EncoderKind::PretrainedAdapter { model_name: "distilroberta-base".into(), max_len: 256 },
            output_dim: 768,
        };
        assert!(spec.validate().is_ok());
        let vocab = Vocabulary::build(&["x"], 1, 8);
        assert_eq!(Encoder::new(spec, vocab, 0).unwrap_err(), Error::BackendUnavailable("distilroberta-base".into()));
    }

    #[test]
    fn from_parts_checks_shapes() {
        let enc = tiny_encoder(8);
        let mut w = enc.weights().to_vec();
        assert!(Encoder::from_parts(enc.spec().clone(), enc.vocab().clone(), w.clone()).is_ok());
        w.pop();
        assert!(Encoder::from_parts(enc.spec().clone(), enc.vocab().clone(), w).is_err());
        let mut spec = enc.spec().clone();
        spec.output_dim = 9;
        assert!(Encoder::from_parts(spec, enc.vocab().clone(), enc.weights().to_vec()).is_err());
    }
}
