//! Pairwise constraint losses over softmax outputs.
//!
//! The alignment score `ĉ = ⟨ŷ_i, ŷ_j⟩` is read as the probability that two
//! samples share a cluster and scored against a (possibly soft) target with
//! binary cross-entropy, averaged over the pairs of a batch.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::nethead::ProbVector;

/// Clamp applied to the alignment score before taking logarithms.
pub const ALIGN_EPS: f64 = 1e-7;

pub fn alignment(a: &ProbVector, b: &ProbVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(dot(a.as_slice(), b.as_slice()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one pair and its derivative with respect to the raw alignment score.
/// Outside `[ε, 1-ε]` the clamped loss is flat, so the derivative is zero.
fn bce(target: f64, score: f64) -> (f64, f64) {
    let s = score.clamp(ALIGN_EPS, 1.0 - ALIGN_EPS);
    let loss = -(target * s.ln() + (1.0 - target) * (1.0 - s).ln());
    let inside = score > ALIGN_EPS && score < 1.0 - ALIGN_EPS;
    let d = if inside { -(target / s) + (1.0 - target) / (1.0 - s) } else { 0.0 };
    (loss, d)
}

/// Pairs of probability vectors with their target relation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairBatch {
    pub left: Vec<ProbVector>,
    pub right: Vec<ProbVector>,
    pub targets: Vec<f64>,
}

impl PairBatch {
    pub fn new(left: Vec<ProbVector>, right: Vec<ProbVector>, targets: Vec<f64>) -> Result<Self> {
        let batch = Self { left, right, targets };
        batch.validate()?;
        Ok(batch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.left.len() != self.right.len() || self.left.len() != self.targets.len() {
            return Err(Error::invalid(format!(
                "pair batch lists differ in length ({}, {}, {})",
                self.left.len(),
                self.right.len(),
                self.targets.len()
            )));
        }
        if let Some(t) = self.targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::invalid(format!("target {t} outside [0, 1]")));
        }
        for (a, b) in self.left.iter().zip(&self.right) {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn swapped(&self) -> Self {
        Self { left: self.right.clone(), right: self.left.clone(), targets: self.targets.clone() }
    }
}

/// A loss value and its gradient with respect to every entry of every
/// probability vector in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLoss {
    pub loss: f64,
    pub grad_left: Vec<Vec<f64>>,
    pub grad_right: Vec<Vec<f64>>,
}

pub fn mcl_loss(batch: &PairBatch) -> Result<PairLoss> {
    batch.validate()?;
    let n = batch.len();
    if n == 0 {
        return Ok(PairLoss { loss: 0.0, grad_left: Vec::new(), grad_right: Vec::new() });
    }
    let scale = 1.0 / n as f64;
    let mut total = 0.0;
    let mut grad_left = Vec::with_capacity(n);
    let mut grad_right = Vec::with_capacity(n);
    for ((a, b), &c) in batch.left.iter().zip(&batch.right).zip(&batch.targets) {
        let (loss, d) = bce(c, dot(a.as_slice(), b.as_slice()));
        total += loss;
        grad_left.push(b.as_slice().iter().map(|v| scale * d * v).collect());
        grad_right.push(a.as_slice().iter().map(|v| scale * d * v).collect());
    }
    Ok(PairLoss { loss: total * scale, grad_left, grad_right })
}

/// A pair of rows in a shared probability matrix with its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexedPair {
    pub i: usize,
    pub j: usize,
    pub target: f64,
}

/// Mean pairwise loss over rows of `probs`, accumulating the gradient into a
/// matrix shaped like `probs`. Pairs are reduced in order.
pub fn mcl_loss_indexed(probs: ArrayView2<'_, f64>, pairs: &[IndexedPair]) -> Result<(f64, Array2<f64>)> {
    let mut grad = Array2::zeros(probs.raw_dim());
    if pairs.is_empty() {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut total = 0.0;
    for p in pairs {
        if p.i >= probs.nrows() || p.j >= probs.nrows() {
            return Err(Error::invalid(format!("pair ({}, {}) outside {} rows", p.i, p.j, probs.nrows())));
        }
        let (a, b) = (probs.row(p.i), probs.row(p.j));
        let (loss, d) = bce(p.target, a.dot(&b));
        total += loss;
        let w = scale * d;
        if w != 0.0 {
            grad.row_mut(p.i).scaled_add(w, &b);
            grad.row_mut(p.j).scaled_add(w, &a);
        }
    }
    Ok((total * scale, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLoss {
    pub loss: f64,
    pub constrained: PairLoss,
    pub pseudo: PairLoss,
}

/// `mcl(constrained) + λ · mcl(pseudo)`; the pseudo gradients are already
/// multiplied by λ.
pub fn combined_loss(constrained: &PairBatch, pseudo: &PairBatch, lambda: f64) -> Result<CombinedLoss> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let c = mcl_loss(constrained)?;
    let mut p = mcl_loss(pseudo)?;
    let loss = c.loss + lambda * p.loss;
    for g in p.grad_left.iter_mut().chain(p.grad_right.iter_mut()) {
        g.iter_mut().for_each(|v| *v *= lambda);
    }
    Ok(CombinedLoss { loss, constrained: c, pseudo: p })
}
