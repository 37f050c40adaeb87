//! Compact differentiable classifier, optimizer and parameter averaging.

mod network;
mod optim;
mod prob;
mod tensor;

pub use network::{
    backward, backward_from_logits, forward, forward_train, weighted_ce_with_grad, ArchConfig,
    ClassifierParams, ForwardCache, LossSpec, CONV1_CHANNELS, CONV2_CHANNELS, HIDDEN_UNITS,
};
pub use optim::{cosine_lr, ema_update_params, sgd_momentum_step, SgdMomentum};
pub use prob::{cross_entropy, softmax, Prediction, Target, PROB_FLOOR};
pub use tensor::Tensor;
