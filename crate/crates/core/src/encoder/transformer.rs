//! Small pre-norm transformer encoder trained from scratch.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::tokenizer::TokenizedBatch;

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyConfig {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub ff_dim: usize,
    pub vocab_size: usize,
    pub max_len: usize,
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.layers, self.heads, self.model_dim, self.ff_dim, self.vocab_size, self.max_len]
            .iter()
            .all(|&v| v >= 1);
        if !all_positive {
            return Err(Error::InvalidConfig("toy transformer sizes must all be >= 1".into()));
        }
        if self.model_dim % self.heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "model_dim {} not divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        if self.max_len < 2 {
            return Err(Error::InvalidConfig("max_len must be >= 2".into()));
        }
        Ok(())
    }

    /// Parameter names and shapes in storage order.
    pub fn layout(&self) -> Vec<(String, (usize, usize))> {
        let d = self.model_dim;
        let mut out = Vec::new();
        out.push((String::from("tok_emb"), (self.vocab_size, d)));
        out.push((String::from("pos_emb"), (self.max_len, d)));
        for l in 0..self.layers {
            let p = |n: &str| format!("layer{l}.{n}");
            out.push((p("ln1_g"), (1, d)));
            out.push((p("ln1_b"), (1, d)));
            for w in ["wq", "wk", "wv", "wo"] {
                out.push((p(w), (d, d)));
                out.push((p(&w.replace('w', "b")), (1, d)));
            }
            out.push((p("ln2_g"), (1, d)));
            out.push((p("ln2_b"), (1, d)));
            out.push((p("ff1_w"), (d, self.ff_dim)));
            out.push((p("ff1_b"), (1, self.ff_dim)));
            out.push((p("ff2_w"), (self.ff_dim, d)));
            out.push((p("ff2_b"), (1, d)));
        }
        out.push((String::from("lnf_g"), (1, d)));
        out.push((String::from("lnf_b"), (1, d)));
        out
    }
}

const PARAMS_PER_LAYER: usize = 16;

/// Weights of the toy transformer, stored flat in [`ToyConfig::layout`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyTransformer {
    config: ToyConfig,
    params: Vec<Matrix>,
}

impl ToyTransformer {
    /// Uniform Glorot initialisation; layer-norm gains 1, biases 0.
    pub fn init(config: ToyConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let params = config
            .layout()
            .into_iter()
            .map(|(name, (r, c))| {
                if name.ends_with("_g") {
                    Matrix::filled(r, c, 1.0)
                } else if r == 1 {
                    Matrix::zeros(r, c)
                } else {
                    let limit = if name.ends_with("emb") { 0.5 } else { libm::sqrt(6.0 / (r + c) as f64) };
                    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-limit..limit)).collect())
                }
            })
            .collect();
        Ok(Self { config, params })
    }

    /// Rebuilds from stored weights, checking every shape against the layout.
    pub fn from_params(config: ToyConfig, params: Vec<Matrix>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != params.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} weight tensors, got {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in layout.iter().zip(&params) {
            if p.shape() != *shape {
                return Err(Error::DimensionMismatch(format!("{name}: expected {shape:?}, got {:?}", p.shape())));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn params(&self) -> &[Matrix] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    /// Records every weight on the tape, trainable or constant.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| if trainable { tape.param(p.clone()) } else { tape.constant(p.clone()) })
            .collect()
    }

    pub fn check_batch(&self, batch: &TokenizedBatch) -> Result<()> {
        if batch.max_len() > self.config.max_len {
            return Err(Error::DimensionMismatch(format!(
                "sequence length {} exceeds positional table {}",
                batch.max_len(),
                self.config.max_len
            )));
        }
        for r in 0..batch.rows() {
            if let Some(&bad) = batch.ids(r).iter().find(|&&id| id >= self.config.vocab_size) {
                return Err(Error::DimensionMismatch(format!(
                    "token id {bad} outside vocabulary of {}",
                    self.config.vocab_size
                )));
            }
        }
        Ok(())
    }

    /// First-position final hidden state for each row, stacked `rows × d`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], batch: &TokenizedBatch) -> Result<Var> {
        self.check_batch(batch)?;
        if batch.rows() == 0 {
            return Err(Error::EmptyInput("tokenized batch"));
        }
        // Positions past the longest row are masked for every row; skip them.
        let len = (0..batch.rows()).map(|r| batch.valid_len(r)).max().unwrap_or(1).max(1);
        let rows: Vec<Var> = (0..batch.rows())
            .map(|r| self.forward_sequence(tape, vars, &batch.ids(r)[..len], batch.valid_len(r)))
            .collect();
        Ok(tape.stack_rows(&rows))
    }

    fn forward_sequence(&self, tape: &mut Tape, vars: &[Var], ids: &[usize], valid: usize) -> Var {
        let c = &self.config;
        let positions: Vec<usize> = (0..ids.len()).collect();
        let tok = tape.gather(vars[0], ids);
        let pos = tape.gather(vars[1], &positions);
        let mut x = tape.add(tok, pos);
        let head_dim = c.model_dim / c.heads;
        let inv_sqrt = 1.0 / libm::sqrt(head_dim as f64);
        for l in 0..c.layers {
            let v = &vars[2 + l * PARAMS_PER_LAYER..2 + (l + 1) * PARAMS_PER_LAYER];
            let h = tape.layer_norm(x, v[0], v[1]);
            let q = tape.linear(h, v[2], v[3]);
            let k = tape.linear(h, v[4], v[5]);
            let val = tape.linear(h, v[6], v[7]);
            let mut heads = Vec::with_capacity(c.heads);
            for hd in 0..c.heads {
                let qh = tape.slice_cols(q, hd * head_dim, head_dim);
                let kh = tape.slice_cols(k, hd * head_dim, head_dim);
                let vh = tape.slice_cols(val, hd * head_dim, head_dim);
                let scores = tape.matmul_nt(qh, kh);
                let scores = tape.scale(scores, inv_sqrt);
                let attn = tape.masked_softmax(scores, valid);
                heads.push(tape.matmul(attn, vh));
            }
            let ctx = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads) };
            let attn_out = tape.linear(ctx, v[8], v[9]);
            x = tape.add(x, attn_out);
            let h2 = tape.layer_norm(x, v[10], v[11]);
            let f = tape.linear(h2, v[12], v[13]);
            let f = tape.relu(f);
            let f = tape.linear(f, v[14], v[15]);
            x = tape.add(x, f);
        }
        let n = vars.len();
        let out = tape.layer_norm(x, vars[n - 2], vars[n - 1]);
        tape.row(out, 0)
    }
}
