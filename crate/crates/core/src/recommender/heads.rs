//! The two classification heads over sentence embeddings.
//!
//! * paper head: `softmax(W2ᵀ · dropout(relu(W1ᵀ e + b1)) + b2)`
//! * paper + scopes head: the paper feature `f` from the same hidden layer,
//!   a scope feature `g_j = relu(Pᵀ s_j + p)` per journal, cosine features
//!   `c_j = cos(f, g_j)` and `softmax(Fᵀ [f; c] + bf)`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{softmax_rows, Tape, Var};
use crate::contrastive::NORM_EPS;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dropout switch for a forward pass.
pub enum ForwardMode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let limit = libm::sqrt(6.0 / (rows + cols) as f64);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect())
}

/// Inverted-dropout keep mask scaled by `1 / (1 - p)`.
fn dropout_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, p: f64) -> Matrix {
    let keep = 1.0 / (1.0 - p);
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadPParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub dropout: f64,
}

impl HeadPParams {
    pub fn init(rng: &mut ChaCha8Rng, input_dim: usize, hidden: usize, journals: usize, dropout: f64) -> Self {
        Self {
            w1: glorot(rng, input_dim, hidden),
            b1: Matrix::zeros(1, hidden),
            w2: glorot(rng, hidden, journals),
            b2: Matrix::zeros(1, journals),
            dropout,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.rows(), self.w1.cols(), self.w2.cols())
    }

    fn check(&self) -> Result<()> {
        let (d, h, j) = self.dims();
        let ok = self.b1.shape() == (1, h) && self.w2.rows() == h && self.b2.shape() == (1, j);
        if !ok {
            return Err(Error::DimensionMismatch(alloc::format!("inconsistent paper head for d={d} h={h} J={j}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadPSParams {
    pub proj_w: Matrix,
    pub proj_b: Matrix,
    pub w1: Matrix,
    pub b1: Matrix,
    pub fusion_w: Matrix,
    pub fusion_b: Matrix,
    pub dropout: f64,
}

impl HeadPSParams {
    pub fn init(rng: &mut ChaCha8Rng, input_dim: usize, hidden: usize, journals: usize, dropout: f64) -> Self {
        Self {
            proj_w: glorot(rng, input_dim, hidden),
            proj_b: Matrix::zeros(1, hidden),
            w1: glorot(rng, input_dim, hidden),
            b1: Matrix::zeros(1, hidden),
            fusion_w: glorot(rng, hidden + journals, journals),
            fusion_b: Matrix::zeros(1, journals),
            dropout,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.rows(), self.w1.cols(), self.fusion_w.cols())
    }

    fn check(&self) -> Result<()> {
        let (d, h, j) = self.dims();
        let ok = self.proj_w.shape() == (d, h)
            && self.proj_b.shape() == (1, h)
            && self.b1.shape() == (1, h)
            && self.fusion_w.rows() == h + j
            && self.fusion_b.shape() == (1, j);
        if !ok {
            return Err(Error::DimensionMismatch(alloc::format!("inconsistent scope head for d={d} h={h} J={j}")));
        }
        Ok(())
    }
}

/// Either head architecture.
#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    Paper(HeadPParams),
    PaperScopes(HeadPSParams),
}

impl Head {
    pub fn kind(&self) -> &'static str {
        match self {
            Head::Paper(_) => "paper",
            Head::PaperScopes(_) => "paper_scopes",
        }
    }

    pub fn uses_scopes(&self) -> bool {
        matches!(self, Head::PaperScopes(_))
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            Head::Paper(p) => p.dims(),
            Head::PaperScopes(p) => p.dims(),
        }
    }

    pub fn dropout(&self) -> f64 {
        match self {
            Head::Paper(p) => p.dropout,
            Head::PaperScopes(p) => p.dropout,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            Head::Paper(_) => &["w1", "b1", "w2", "b2"],
            Head::PaperScopes(_) => &["proj_w", "proj_b", "w1", "b1", "fusion_w", "fusion_b"],
        };
        names.iter().map(|s| String::from(*s)).collect()
    }

    pub fn params(&self) -> Vec<&Matrix> {
        match self {
            Head::Paper(p) => alloc::vec![&p.w1, &p.b1, &p.w2, &p.b2],
            Head::PaperScopes(p) => alloc::vec![&p.proj_w, &p.proj_b, &p.w1, &p.b1, &p.fusion_w, &p.fusion_b],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Head::Paper(p) => alloc::vec![&mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2],
            Head::PaperScopes(p) => {
                alloc::vec![&mut p.proj_w, &mut p.proj_b, &mut p.w1, &mut p.b1, &mut p.fusion_w, &mut p.fusion_b]
            }
        }
    }

    /// Rebuilds a head from stored tensors in [`Head::param_names`] order.
    pub fn from_params(uses_scopes: bool, mut params: Vec<Matrix>, dropout: f64) -> Result<Self> {
        let expected = if uses_scopes { 6 } else { 4 };
        if params.len() != expected {
            return Err(Error::DimensionMismatch(alloc::format!(
                "expected {expected} head tensors, got {}",
                params.len()
            )));
        }
        let mut next = || params.remove(0);
        let head = if uses_scopes {
            Head::PaperScopes(HeadPSParams {
                proj_w: next(),
                proj_b: next(),
                w1: next(),
                b1: next(),
                fusion_w: next(),
                fusion_b: next(),
                dropout,
            })
        } else {
            Head::Paper(HeadPParams { w1: next(), b1: next(), w2: next(), b2: next(), dropout })
        };
        head.check()?;
        Ok(head)
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Head::Paper(p) => p.check(),
            Head::PaperScopes(p) => p.check(),
        }
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params()
            .into_iter()
            .map(|p| if trainable { tape.param(p.clone()) } else { tape.constant(p.clone()) })
            .collect()
    }

    /// Logits for a batch of embeddings (`rows × d`). `scopes` is the
    /// `J × d` scope table and is required by the scope head.
    pub fn logits(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        embeddings: Var,
        scopes: Option<Var>,
        mode: ForwardMode<'_>,
    ) -> Result<Var> {
        self.check()?;
        let (d, h, j) = self.dims();
        if tape.value(embeddings).cols() != d {
            return Err(Error::DimensionMismatch(alloc::format!(
                "embedding width {} but head expects {d}",
                tape.value(embeddings).cols()
            )));
        }
        let rows = tape.value(embeddings).rows();
        let (w1, b1) = match self {
            Head::Paper(_) => (vars[0], vars[1]),
            Head::PaperScopes(_) => (vars[2], vars[3]),
        };
        let hidden = tape.linear(embeddings, w1, b1);
        let mut feature = tape.relu(hidden);
        if let ForwardMode::Train(rng) = mode {
            let p = self.dropout();
            if p > 0.0 {
                let mask = dropout_mask(rng, rows, h, p);
                feature = tape.mul_const(feature, mask);
            }
        }
        match self {
            Head::Paper(_) => Ok(tape.linear(feature, vars[2], vars[3])),
            Head::PaperScopes(_) => {
                let scopes = scopes.ok_or_else(|| Error::DimensionMismatch("scope table required".into()))?;
                if tape.value(scopes).shape() != (j, d) {
                    return Err(Error::DimensionMismatch(alloc::format!(
                        "scope table {:?}, expected ({j}, {d})",
                        tape.value(scopes).shape()
                    )));
                }
                let proj = tape.linear(scopes, vars[0], vars[1]);
                let g = tape.relu(proj);
                let f_unit = tape.row_normalize(feature, NORM_EPS);
                let g_unit = tape.row_normalize(g, NORM_EPS);
                let cosines = tape.matmul_nt(f_unit, g_unit);
                let joined = tape.concat_cols(&[feature, cosines]);
                Ok(tape.linear(joined, vars[4], vars[5]))
            }
        }
    }

    /// Probabilities for a batch of embeddings.
    pub fn predict(&self, embeddings: &Matrix, scopes: Option<&Matrix>, mode: ForwardMode<'_>) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let e = tape.constant(embeddings.clone());
        let s = scopes.map(|s| tape.constant(s.clone()));
        let logits = self.logits(&mut tape, &vars, e, s, mode)?;
        Ok(softmax_rows(tape.value(logits)))
    }
}

/// Journal probabilities from the paper head for one embedding.
pub fn forward_p(embedding: &[f64], params: &HeadPParams, mode: ForwardMode<'_>) -> Result<Vec<f64>> {
    let head = Head::Paper(params.clone());
    Ok(head.predict(&Matrix::row_vector(embedding), None, mode)?.into_vec())
}

/// Journal probabilities from the paper + scopes head for one embedding.
pub fn forward_ps(
    embedding: &[f64],
    scopes: &Matrix,
    params: &HeadPSParams,
    mode: ForwardMode<'_>,
) -> Result<Vec<f64>> {
    let head = Head::PaperScopes(params.clone());
    Ok(head.predict(&Matrix::row_vector(embedding), Some(scopes), mode)?.into_vec())
}

/// The cosine feature vector of the scope head (eval mode), exposed for inspection.
pub fn scope_cosines(embedding: &[f64], scopes: &Matrix, params: &HeadPSParams) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let e = tape.constant(Matrix::row_vector(embedding));
    let w1 = tape.constant(params.w1.clone());
    let b1 = tape.constant(params.b1.clone());
    let f = tape.linear(e, w1, b1);
    let f = tape.relu(f);
    let s = tape.constant(scopes.clone());
    let pw = tape.constant(params.proj_w.clone());
    let pb = tape.constant(params.proj_b.clone());
    let g = tape.linear(s, pw, pb);
    let g = tape.relu(g);
    let fu = tape.row_normalize(f, NORM_EPS);
    let gu = tape.row_normalize(g, NORM_EPS);
    let c = tape.matmul_nt(fu, gu);
    Ok(tape.value(c).as_slice().to_vec())
}
