//! On-disk encoder and model artifacts.
//!
//! Encoder directory:
//!
//! ```text
//! manifest.json    format_version, kind, config, output_dim, tensors, vocab_size, ...
//! weights.bin      tensor blob
//! vocab.txt        one token per line, id = line index
//! loss_log.jsonl   contrastive loss per step
//! ```
//!
//! Model directory:
//!
//! ```text
//! manifest.json    format_version, architecture, combo, dims, seed, hashes, ...
//! head.bin         tensor blob
//! encoder/         encoder directory as above
//! journals.jsonl   journal table snapshot
//! stopwords.txt    stop-word list the model was trained with
//! train_log.jsonl  head training loss per step
//! ```
//!
//! Tensor blobs are `SRW1`, a little-endian `u32` tensor count, then per
//! tensor a `u32` name length, the UTF-8 name, `u64` rows, `u64` cols and
//! `rows * cols` little-endian `f64` values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use simrec_core::contrastive::{ContrastiveConfig, LossRecord};
use simrec_core::corpus::{FeatureCombo, JournalProfile, JournalTable};
use simrec_core::encoder::{Encoder, EncoderSpec, Vocabulary};
use simrec_core::linalg::Matrix;
use simrec_core::recommender::{Head, HeadConfig, TrainedModel};
use simrec_core::text::Normalizer;

use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SRW1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: (usize, usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EncoderManifest {
    format_version: u32,
    #[serde(flatten)]
    spec: EncoderSpec,
    vocab_size: usize,
    tensors: Vec<TensorInfo>,
    fingerprint: String,
    #[serde(default)]
    journal_table: Option<String>,
    #[serde(default)]
    training: Option<ContrastiveConfig>,
}

/// A loaded encoder directory.
#[derive(Clone, Debug)]
pub struct EncoderArtifact {
    pub encoder: Encoder,
    /// Fingerprint of the journal table the encoder was fine-tuned against.
    pub journal_table: Option<String>,
    pub training: Option<ContrastiveConfig>,
    pub log: Vec<LossRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadDims {
    pub input: usize,
    pub hidden: usize,
    pub journals: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub architecture: String,
    pub combo: FeatureCombo,
    pub dims: HeadDims,
    pub dropout: f64,
    pub seed: u64,
    pub journal_table: String,
    pub encoder_hash: String,
    pub model_hash: String,
    pub skipped: usize,
    #[serde(default)]
    pub training: Option<HeadConfig>,
}

/// A loaded model directory plus the normalizer it was trained with.
#[derive(Clone, Debug)]
pub struct ModelArtifact {
    pub model: TrainedModel,
    pub normalizer: Normalizer,
    pub manifest: ModelManifest,
}

fn mismatch(detail: impl Into<String>) -> Error {
    Error::ManifestMismatch(detail.into())
}

pub fn write_tensors(path: &Path, tensors: &[(String, &Matrix)]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, m) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| mismatch("truncated tensor blob"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| mismatch("tensor dimension overflow"))
    }
}

pub fn read_tensors(path: &Path) -> Result<Vec<(String, Matrix)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(mismatch(format!("{}: not a tensor blob", path.display())));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| mismatch("tensor name is not UTF-8"))?;
        let rows = r.u64()?;
        let cols = r.u64()?;
        let n = rows.checked_mul(cols).ok_or_else(|| mismatch("tensor dimension overflow"))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| mismatch("tensor dimension overflow"))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Matrix::from_vec(rows, cols, data)));
    }
    if r.pos != bytes.len() {
        return Err(mismatch(format!("{}: trailing bytes", path.display())));
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_manifest<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<T> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|_| mismatch(format!("{}: missing manifest", dir.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| mismatch(format!("{}: {e}", path.display())))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => return Err(mismatch(format!("unsupported format_version {v}"))),
        None => return Err(mismatch("manifest has no format_version")),
    }
    serde_json::from_value(value).map_err(|e| mismatch(format!("{}: {e}", path.display())))
}

pub fn save_encoder(
    dir: &Path,
    encoder: &Encoder,
    journal_table: Option<&str>,
    training: Option<&ContrastiveConfig>,
    log: &[LossRecord],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let names = encoder.weight_names();
    let tensors: Vec<(String, &Matrix)> = names.iter().cloned().zip(encoder.weights()).collect();
    let manifest = EncoderManifest {
        format_version: FORMAT_VERSION,
        spec: encoder.spec().clone(),
        vocab_size: encoder.vocab().len(),
        tensors: tensors.iter().map(|(n, m)| TensorInfo { name: n.clone(), shape: m.shape() }).collect(),
        fingerprint: encoder.fingerprint(),
        journal_table: journal_table.map(str::to_owned),
        training: training.cloned(),
    };
    write_tensors(&dir.join("weights.bin"), &tensors)?;
    let mut vocab = encoder.vocab().tokens().join("\n");
    vocab.push('\n');
    let vocab_path = dir.join("vocab.txt");
    fs::write(&vocab_path, vocab).map_err(|e| Error::io(&vocab_path, e))?;
    write_jsonl(&dir.join("loss_log.jsonl"), log)?;
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn load_encoder(dir: &Path) -> Result<EncoderArtifact> {
    let manifest: EncoderManifest = read_manifest(dir)?;
    let vocab_path = dir.join("vocab.txt");
    let vocab_text = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let tokens: Vec<String> = vocab_text.lines().map(str::to_owned).collect();
    if tokens.len() != manifest.vocab_size {
        return Err(mismatch(format!("vocab_size {} but vocab.txt has {} tokens", manifest.vocab_size, tokens.len())));
    }
    let vocab = Vocabulary::from_tokens(tokens).ok_or_else(|| mismatch("vocab.txt lacks the special tokens"))?;
    let stored = read_tensors(&dir.join("weights.bin"))?;
    let listed: Vec<TensorInfo> = stored.iter().map(|(n, m)| TensorInfo { name: n.clone(), shape: m.shape() }).collect();
    if listed != manifest.tensors {
        return Err(mismatch("weights.bin does not match the manifest tensor list"));
    }
    let weights = stored.into_iter().map(|(_, m)| m).collect();
    let encoder = match Encoder::from_parts(manifest.spec, vocab, weights) {
        Ok(e) => e,
        Err(e @ simrec_core::Error::BackendUnavailable(_)) => return Err(e.into()),
        Err(e) => return Err(mismatch(e.to_string())),
    };
    if encoder.fingerprint() != manifest.fingerprint {
        return Err(mismatch("encoder fingerprint differs from manifest"));
    }
    let log_path = dir.join("loss_log.jsonl");
    let log = if log_path.exists() { read_jsonl(&log_path)? } else { Vec::new() };
    Ok(EncoderArtifact { encoder, journal_table: manifest.journal_table, training: manifest.training, log })
}

/// Writes a trained model. `normalizer` must be the one it was trained
/// with; its stop-word list is stored so serving composes text identically.
pub fn save_model(dir: &Path, model: &TrainedModel, normalizer: &Normalizer, training: Option<&HeadConfig>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let journal_fp = model.journals.fingerprint();
    save_encoder(&dir.join("encoder"), &model.encoder, Some(&journal_fp), None, &[])?;
    let (input, hidden, journals) = model.head.dims();
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        architecture: model.head.kind().to_owned(),
        combo: model.combo,
        dims: HeadDims { input, hidden, journals },
        dropout: model.head.dropout(),
        seed: model.seed,
        journal_table: journal_fp,
        encoder_hash: model.encoder.fingerprint(),
        model_hash: model.fingerprint(),
        skipped: model.skipped,
        training: training.cloned(),
    };
    let tensors: Vec<(String, &Matrix)> = model.head.param_names().into_iter().zip(model.head.params()).collect();
    write_tensors(&dir.join("head.bin"), &tensors)?;
    write_jsonl(&dir.join("journals.jsonl"), model.journals.as_slice())?;
    let mut stop = normalizer.stopwords().collect::<Vec<_>>().join("\n");
    stop.push('\n');
    let stop_path = dir.join("stopwords.txt");
    fs::write(&stop_path, stop).map_err(|e| Error::io(&stop_path, e))?;
    write_jsonl(&dir.join("train_log.jsonl"), &model.log)?;
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn load_model(dir: &Path) -> Result<ModelArtifact> {
    let manifest: ModelManifest = read_manifest(dir)?;
    let stop_path = dir.join("stopwords.txt");
    let stop = fs::read_to_string(&stop_path).map_err(|e| Error::io(&stop_path, e))?;
    let mut normalizer = Normalizer::empty();
    normalizer.extend_stopwords(stop.lines().filter(|l| !l.is_empty()));

    let profiles: Vec<JournalProfile> = read_jsonl(&dir.join("journals.jsonl"))?;
    let journals = JournalTable::new(profiles, &normalizer)?;
    if journals.fingerprint() != manifest.journal_table {
        return Err(mismatch("journal table differs from manifest"));
    }
    let enc = load_encoder(&dir.join("encoder"))?;
    if enc.encoder.fingerprint() != manifest.encoder_hash {
        return Err(mismatch("encoder differs from manifest"));
    }
    let stored = read_tensors(&dir.join("head.bin"))?;
    let uses_scopes = manifest.combo.use_scopes;
    let head = Head::from_params(uses_scopes, stored.into_iter().map(|(_, m)| m).collect(), manifest.dropout)
        .map_err(|e| mismatch(e.to_string()))?;
    if head.kind() != manifest.architecture {
        return Err(mismatch(format!("architecture {} but head tensors describe {}", manifest.architecture, head.kind())));
    }
    let (input, hidden, j) = head.dims();
    if (HeadDims { input, hidden, journals: j }) != manifest.dims {
        return Err(mismatch("head dims differ from manifest"));
    }
    let mut model = TrainedModel::from_parts(enc.encoder, head, manifest.combo, journals, manifest.seed, &normalizer)
        .map_err(|e| mismatch(e.to_string()))?;
    model.skipped = manifest.skipped;
    let log_path = dir.join("train_log.jsonl");
    if log_path.exists() {
        model.log = read_jsonl(&log_path)?;
    }
    if model.fingerprint() != manifest.model_hash {
        return Err(mismatch("model hash differs from manifest"));
    }
    Ok(ModelArtifact { model, normalizer, manifest })
}
