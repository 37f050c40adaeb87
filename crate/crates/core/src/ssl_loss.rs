//! Confidence-masked consistency loss with hard pseudo-labels, supervised loss, and
//! their weighted sum.

use crate::error::{Result, SaaError};
use crate::model::{cross_entropy, Prediction, Target};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudoLabel<T> {
    pub class: usize,
    pub confidence: T,
    pub accepted: bool,
}

/// Argmax of the weak-view prediction, accepted when its probability is at least `tau`.
pub fn pseudo_label<T: Scalar>(weak: &Prediction<T>, tau: T) -> PseudoLabel<T> {
    let class = weak.argmax();
    let confidence = weak.probs[class];
    PseudoLabel { class, confidence, accepted: confidence >= tau }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnsupLoss<T> {
    /// Mean over the whole unlabeled batch; rejected samples contribute zero.
    pub loss: T,
    /// Unmasked `H(argmax p_w, p_s)` for every sample.
    pub raw: Vec<T>,
    pub labels: Vec<PseudoLabel<T>>,
    pub mask_rate: T,
}

pub fn unsup_loss<T: Scalar>(weak: &[Prediction<T>], strong: &[Prediction<T>], tau: T) -> Result<UnsupLoss<T>> {
    if weak.len() != strong.len() {
        return Err(SaaError::Shape(format!(
            "{} weak predictions vs {} strong predictions",
            weak.len(),
            strong.len()
        )));
    }
    if weak.is_empty() {
        return Err(SaaError::invalid("empty unlabeled batch"));
    }
    let labels: Vec<PseudoLabel<T>> = weak.iter().map(|p| pseudo_label(p, tau)).collect();
    let raw: Vec<T> = labels
        .iter()
        .zip(strong)
        .map(|(pl, ps)| cross_entropy(Target::Class(pl.class), ps))
        .collect();
    let n = T::from_usize_lossy(weak.len());
    let masked: T = labels.iter().zip(&raw).filter(|(pl, _)| pl.accepted).map(|(_, &l)| l).sum();
    let accepted = labels.iter().filter(|pl| pl.accepted).count();
    Ok(UnsupLoss { loss: masked / n, raw, labels, mask_rate: T::from_usize_lossy(accepted) / n })
}

/// Mean cross entropy against integer labels.
pub fn sup_loss<T: Scalar>(preds: &[Prediction<T>], labels: &[usize]) -> Result<T> {
    if preds.len() != labels.len() {
        return Err(SaaError::Shape(format!("{} predictions vs {} labels", preds.len(), labels.len())));
    }
    if preds.is_empty() {
        return Err(SaaError::invalid("empty labeled batch"));
    }
    let total: T = preds.iter().zip(labels).map(|(p, &y)| cross_entropy(Target::Class(y), p)).sum();
    Ok(total / T::from_usize_lossy(preds.len()))
}

pub fn total_loss<T: Scalar>(sup: T, unsup: T, lambda: T) -> T {
    sup + lambda * unsup
}

/// Loss summary of one training iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport<T> {
    pub sup_loss: T,
    pub unsup_loss: T,
    pub total: T,
    pub mask_rate: T,
    pub per_sample_raw_losses: Vec<T>,
}

impl<T: Scalar> LossReport<T> {
    pub fn new(sup: T, unsup: &UnsupLoss<T>, lambda: T) -> Self {
        LossReport {
            sup_loss: sup,
            unsup_loss: unsup.loss,
            total: total_loss(sup, unsup.loss, lambda),
            mask_rate: unsup.mask_rate,
            per_sample_raw_losses: unsup.raw.clone(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.sup_loss.is_finite()
            && self.unsup_loss.is_finite()
            && self.total.is_finite()
            && self.per_sample_raw_losses.iter().all(|v| v.is_finite())
    }
}
