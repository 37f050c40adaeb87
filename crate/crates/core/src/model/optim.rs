use crate::error::{Result, SaaError};
use crate::scalar::Scalar;

use super::network::ClassifierParams;

fn check_pair<T: Scalar>(a: &ClassifierParams<T>, b: &ClassifierParams<T>, what: &str) -> Result<()> {
    if a.same_structure(b) {
        Ok(())
    } else {
        Err(SaaError::Shape(format!(
            "{what}: architectures differ ({:?} vs {:?})",
            a.arch(),
            b.arch()
        )))
    }
}

/// SGD with heavy-ball momentum and L2 weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdMomentum<T> {
    pub momentum: T,
    pub weight_decay: T,
    pub velocity: ClassifierParams<T>,
}

impl<T: Scalar> SgdMomentum<T> {
    pub fn new(params: &ClassifierParams<T>, momentum: T, weight_decay: T) -> Self {
        SgdMomentum { momentum, weight_decay, velocity: ClassifierParams::zeros(params.arch()) }
    }

    /// `v ← μ·v + g + wd·θ;  θ ← θ − lr·v`
    pub fn step(&mut self, params: &mut ClassifierParams<T>, grads: &ClassifierParams<T>, lr: T) -> Result<()> {
        sgd_momentum_step(params, &mut self.velocity, grads, lr, self.momentum, self.weight_decay)
    }
}

pub fn sgd_momentum_step<T: Scalar>(
    params: &mut ClassifierParams<T>,
    velocity: &mut ClassifierParams<T>,
    grads: &ClassifierParams<T>,
    lr: T,
    momentum: T,
    weight_decay: T,
) -> Result<()> {
    check_pair(params, grads, "sgd step")?;
    check_pair(params, velocity, "sgd velocity")?;
    for ((p, v), g) in params
        .tensors_mut()
        .iter_mut()
        .zip(velocity.tensors_mut().iter_mut())
        .zip(grads.tensors())
    {
        for ((p, v), &g) in p.data_mut().iter_mut().zip(v.data_mut().iter_mut()).zip(g.data()) {
            *v = momentum * *v + g + weight_decay * *p;
            *p -= lr * *v;
        }
    }
    params.version += 1;
    velocity.version += 1;
    Ok(())
}

/// Cosine decay that ends at `cos(7π/16)` of the base rate.
pub fn cosine_lr(step: u64, total_steps: u64, base_lr: f64) -> Result<f64> {
    if total_steps == 0 || step > total_steps {
        return Err(SaaError::invalid(format!(
            "learning-rate step {step} outside [0, {total_steps}]"
        )));
    }
    let progress = step as f64 / total_steps as f64;
    Ok(base_lr * (7.0 * std::f64::consts::PI * progress / 16.0).cos())
}

/// `ema ← decay·ema + (1 − decay)·θ`, elementwise.
pub fn ema_update_params<T: Scalar>(
    ema: &mut ClassifierParams<T>,
    params: &ClassifierParams<T>,
    decay: T,
) -> Result<()> {
    if !(decay >= T::zero() && decay < T::one()) {
        return Err(SaaError::invalid(format!("EMA decay {decay} outside [0, 1)")));
    }
    check_pair(ema, params, "ema update")?;
    let keep = T::one() - decay;
    for (e, p) in ema.tensors_mut().iter_mut().zip(params.tensors()) {
        for (e, &p) in e.data_mut().iter_mut().zip(p.data()) {
            *e = decay * *e + keep * p;
        }
    }
    ema.version += 1;
    Ok(())
}
