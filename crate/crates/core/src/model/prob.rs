//! Probability vectors and the clamped cross entropy used by every loss term.

use crate::scalar::Scalar;

/// Probabilities are clamped from below before taking logs.
pub const PROB_FLOOR: f64 = 1e-7;

/// Per-class probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub probs: Vec<T>,
}

impl<T: Scalar> Prediction<T> {
    pub fn new(probs: Vec<T>) -> Self {
        Prediction { probs }
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest probability; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_prob(&self) -> T {
        self.probs[self.argmax()]
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Prediction<T> {
    let mut out = vec![T::zero(); logits.len()];
    softmax_into(logits, &mut out);
    Prediction { probs: out }
}

pub(crate) fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Cross-entropy target: either a class index or a full distribution.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a, T> {
    Class(usize),
    Soft(&'a Prediction<T>),
}

/// `H(target, pred) = -Σ target_k · ln(max(pred_k, 1e-7))`.
pub fn cross_entropy<T: Scalar>(target: Target<'_, T>, pred: &Prediction<T>) -> T {
    let floor = T::lit(PROB_FLOOR);
    match target {
        Target::Class(k) => -pred.probs[k].max(floor).ln(),
        Target::Soft(t) => t
            .probs
            .iter()
            .zip(&pred.probs)
            .filter(|(tk, _)| **tk > T::zero())
            .map(|(&tk, &pk)| -tk * pk.max(floor).ln())
            .sum(),
    }
}
