//! Supervised contrastive fine-tuning with in-batch negatives.
//!
//! For a batch of `N` (paper, scope) embedding pairs the loss for row `i` is
//! `-log(exp(S_ii / τ) / Σ_j exp(S_ij / τ))` where `S_ij` is the cosine
//! similarity between paper `i` and scope `j`. The batch loss is the mean
//! over rows.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::Tape;
use crate::corpus::PairDataset;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::optim::{AdamW, AdamWConfig, WarmupSchedule};

/// Vectors with norm at or below this are treated as zero.
pub const NORM_EPS: f64 = 1e-12;

pub fn cosine_similarity(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::DimensionMismatch(alloc::format!("{} vs {}", h1.len(), h2.len())));
    }
    let n1 = norm(h1);
    if n1 <= NORM_EPS {
        return Err(Error::ZeroNormVector { index: 0 });
    }
    let n2 = norm(h2);
    if n2 <= NORM_EPS {
        return Err(Error::ZeroNormVector { index: 1 });
    }
    Ok((dot(h1, h2) / (n1 * n2)).clamp(-1.0, 1.0))
}

/// `N × N` cosine similarities between paper rows and scope rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix(Matrix);

impl SimilarityMatrix {
    /// Panics unless `m` is square.
    pub fn from_matrix(m: Matrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "similarity matrix must be square");
        Self(m)
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Entry `(i, j)` is the cosine of row `i` of `h` and row `j` of `h_plus`.
/// A zero-norm row reports its index (rows of `h_plus` are offset by `h.rows()`).
pub fn similarity_matrix(h: &Matrix, h_plus: &Matrix) -> Result<SimilarityMatrix> {
    if h.shape() != h_plus.shape() {
        return Err(Error::DimensionMismatch(alloc::format!("{:?} vs {:?}", h.shape(), h_plus.shape())));
    }
    let n = h.rows();
    let norms = |m: &Matrix, offset: usize| -> Result<Vec<f64>> {
        (0..n)
            .map(|i| {
                let v = norm(m.row(i));
                if v <= NORM_EPS {
                    Err(Error::ZeroNormVector { index: i + offset })
                } else {
                    Ok(v)
                }
            })
            .collect()
    };
    let a = norms(h, 0)?;
    let b = norms(h_plus, n)?;
    let mut s = h.matmul_nt(h_plus);
    for i in 0..n {
        for j in 0..n {
            let v = s.get(i, j) / (a[i] * b[j]);
            s.set(i, j, v.clamp(-1.0, 1.0));
        }
    }
    Ok(SimilarityMatrix(s))
}

/// Mean loss and the softmax weights of each row's denominator.
///
/// With `include_positive = false` the diagonal is left out of the
/// denominator; rows with no remaining terms contribute zero.
pub(crate) fn info_nce_forward(s: &Matrix, tau: f64, include_positive: bool) -> (f64, Matrix) {
    let n = s.rows();
    let mut probs = Matrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        let in_denominator = |j: usize| include_positive || j != i;
        let max = (0..n).filter(|&j| in_denominator(j)).map(|j| s.get(i, j) / tau).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            continue;
        }
        let mut sum = 0.0;
        for j in (0..n).filter(|&j| in_denominator(j)) {
            let e = libm::exp(s.get(i, j) / tau - max);
            probs.set(i, j, e);
            sum += e;
        }
        for j in 0..n {
            let v = probs.get(i, j) / sum;
            probs.set(i, j, v);
        }
        total += max + libm::log(sum) - s.get(i, i) / tau;
    }
    (total / n as f64, probs)
}

/// `∂loss/∂S` given the row-softmax weights from [`info_nce_forward`].
pub(crate) fn info_nce_grad_from_probs(probs: &Matrix, tau: f64, include_positive: bool) -> Matrix {
    let n = probs.rows();
    let mut g = probs.clone();
    for i in 0..n {
        let has_terms = include_positive || n > 1;
        let v = g.get(i, i) - if has_terms { 1.0 } else { 0.0 };
        g.set(i, i, v);
    }
    g.scale(1.0 / (tau * n as f64))
}

/// Mean in-batch-negative loss, positive included in each denominator.
pub fn info_nce_loss(s: &SimilarityMatrix, tau: f64) -> f64 {
    info_nce_forward(&s.0, tau, true).0
}

/// Loss variant selector for comparison runs.
pub fn info_nce_loss_with(s: &SimilarityMatrix, tau: f64, include_positive: bool) -> f64 {
    info_nce_forward(&s.0, tau, include_positive).0
}

/// Analytic gradient of [`info_nce_loss`] with respect to every `S_ij`.
pub fn info_nce_grad(s: &SimilarityMatrix, tau: f64) -> Matrix {
    let (_, probs) = info_nce_forward(&s.0, tau, true);
    info_nce_grad_from_probs(&probs, tau, true)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ContrastiveConfig {
    pub tau: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub include_positive: bool,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            batch_size: 32,
            epochs: 3,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            warmup_fraction: 0.1,
            seed: 42,
            include_positive: true,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("tau must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig("batch_size and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive, weight_decay non-negative".into()));
        }
        Ok(())
    }
}

/// One optimizer step's record in the loss log.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrainingWarning {
    /// Mini-batches of a single pair carry no negatives; their loss is 0.
    DegenerateBatch { count: usize },
}

#[derive(Debug)]
pub struct FinetuneOutcome {
    pub encoder: Encoder,
    pub log: Vec<LossRecord>,
    pub warnings: Vec<TrainingWarning>,
}

impl FinetuneOutcome {
    /// Mean loss of each epoch, in order.
    pub fn epoch_means(&self) -> Vec<f64> {
        epoch_means(&self.log)
    }
}

pub fn epoch_means(log: &[LossRecord]) -> Vec<f64> {
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in log {
        let e = sums.entry(r.epoch).or_default();
        e.0 += r.loss;
        e.1 += 1;
    }
    sums.values().map(|(s, c)| s / *c as f64).collect()
}

/// Contrastive fine-tuning of every encoder weight with AdamW.
///
/// Runs `epochs × ceil(|pairs| / batch_size)` steps over a seeded shuffle;
/// the last batch of an epoch may be smaller.
pub fn finetune(mut encoder: Encoder, pairs: &PairDataset, config: &ContrastiveConfig) -> Result<FinetuneOutcome> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pair dataset"));
    }
    let max_len = encoder.max_len();
    let papers: Vec<&str> = pairs.pairs.iter().map(|(x, _)| x.as_str()).collect();
    let paper_tokens = encoder.tokenize(&papers, max_len);

    // scope texts repeat across pairs; encode each distinct one once per step
    let mut scope_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut scope_list: Vec<&str> = Vec::new();
    let pair_scope: Vec<usize> = pairs
        .pairs
        .iter()
        .map(|(_, s)| {
            *scope_ids.entry(s.as_str()).or_insert_with(|| {
                scope_list.push(s.as_str());
                scope_list.len() - 1
            })
        })
        .collect();
    let scope_tokens = encoder.tokenize(&scope_list, max_len);

    let steps_per_epoch = pairs.len().div_ceil(config.batch_size);
    let schedule = WarmupSchedule::from_fraction(steps_per_epoch * config.epochs, config.warmup_fraction);
    let mut opt = AdamW::new(
        AdamWConfig::new(config.learning_rate, config.weight_decay),
        encoder.weights().iter().map(Matrix::shape),
    );
    let scales: Vec<f64> = alloc::vec![1.0; encoder.weights().len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut log = Vec::with_capacity(steps_per_epoch * config.epochs);
    let mut degenerate = 0;
    let mut step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            if batch.len() == 1 {
                degenerate += 1;
            }
            let mut local: BTreeMap<usize, usize> = BTreeMap::new();
            let mut unique = Vec::new();
            let gather_idx: Vec<usize> = batch
                .iter()
                .map(|&p| {
                    *local.entry(pair_scope[p]).or_insert_with(|| {
                        unique.push(pair_scope[p]);
                        unique.len() - 1
                    })
                })
                .collect();

            let mut tape = Tape::new();
            let vars = encoder.bind(&mut tape, true);
            let h = encoder.forward(&mut tape, &vars, &paper_tokens.select(batch))?;
            let scopes = encoder.forward(&mut tape, &vars, &scope_tokens.select(&unique))?;
            let h_plus = tape.gather(scopes, &gather_idx);
            let h = tape.row_normalize(h, NORM_EPS);
            let h_plus = tape.row_normalize(h_plus, NORM_EPS);
            let sim = tape.matmul_nt(h, h_plus);
            let loss_var = tape.info_nce(sim, config.tau, config.include_positive);
            let loss = tape.value(loss_var).get(0, 0);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            let grads = tape.backward(loss_var);
            let grads: Vec<Matrix> = vars
                .iter()
                .zip(encoder.weights())
                .map(|(&v, w)| grads.get_or_zeros(v, w.shape()))
                .collect();
            let lr = config.learning_rate * schedule.factor(step);
            let mut params: Vec<&mut Matrix> = encoder.weights_mut().iter_mut().collect();
            opt.step(&mut params, &grads, lr, &scales);
            log.push(LossRecord { step, epoch, loss, learning_rate: lr });
            step += 1;
        }
    }

    let mut warnings = Vec::new();
    if degenerate > 0 {
        warnings.push(TrainingWarning::DegenerateBatch { count: degenerate });
    }
    Ok(FinetuneOutcome { encoder, log, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sm(rows: &[Vec<f64>]) -> SimilarityMatrix {
        SimilarityMatrix::from_matrix(Matrix::from_rows(rows))
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - 0.7071).abs() < 1e-4);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNormVector { index: 0 }));
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1e-13, 0.0]), Err(Error::ZeroNormVector { index: 1 }));
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn similarity_matrix_examples() {
        let eye = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(similarity_matrix(&eye, &eye).unwrap().as_matrix(), &eye);
        let same = Matrix::from_rows(&[vec![0.3, -2.0], vec![0.3, -2.0]]);
        let s = similarity_matrix(&same, &same).unwrap();
        assert!(s.as_matrix().as_slice().iter().all(|v| (v - 1.0).abs() < 1e-15));
        let with_zero = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(similarity_matrix(&same, &with_zero).unwrap_err(), Error::ZeroNormVector { index: 3 });
    }

    #[test]
    fn loss_examples() {
        let uniform = sm(&[vec![0.3, 0.3], vec![0.3, 0.3]]);
        assert!((info_nce_loss(&uniform, 0.05) - core::f64::consts::LN_2).abs() < 1e-6);
        assert_eq!(info_nce_loss(&sm(&[vec![0.77]]), 0.05), 0.0);
        let eye = sm(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let expected = libm::log(1.0 + libm::exp(-1.0));
        assert!((info_nce_loss(&eye, 1.0) - expected).abs() < 1e-6);
        assert!((info_nce_loss(&eye, 1.0) - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn excluded_positive_variant() {
        let eye = sm(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        // -log(e^1 / e^0) = -1
        assert!((info_nce_loss_with(&eye, 1.0, false) + 1.0).abs() < 1e-12);
        assert_eq!(info_nce_loss_with(&sm(&[vec![0.5]]), 1.0, false), 0.0);
    }

    #[test]
    fn single_row_gradient_is_zero() {
        let g = info_nce_grad(&sm(&[vec![0.4]]), 0.05);
        assert_eq!(g.as_slice(), &[0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = Matrix::from_rows(&[
            vec![0.9, -0.2, 0.1, 0.4],
            vec![0.3, 0.5, -0.7, 0.0],
            vec![-0.1, 0.2, 0.8, 0.6],
            vec![0.25, -0.5, 0.35, 0.1],
        ]);
        for (tau, include) in [(0.5, true), (0.07, true), (0.5, false)] {
            let (_, probs) = info_nce_forward(&s, tau, include);
            let g = info_nce_grad_from_probs(&probs, tau, include);
            for i in 0..4 {
                for j in 0..4 {
                    let h = 1e-5;
                    let mut p = s.clone();
                    p.set(i, j, s.get(i, j) + h);
                    let mut m = s.clone();
                    m.set(i, j, s.get(i, j) - h);
                    let fd = (info_nce_forward(&p, tau, include).0 - info_nce_forward(&m, tau, include).0) / (2.0 * h);
                    let a = g.get(i, j);
                    assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8) < 1e-4, "({i},{j}) {a} vs {fd}");
                }
            }
        }
    }
}
