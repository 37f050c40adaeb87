//! Semi-supervised image classification with per-sample adaptive augmentation.
//!
//! Each unlabeled sample carries an exponential moving average of its consistency loss.
//! Once per epoch the averages are split by Otsu's method; low-loss ("naive") samples then
//! receive a regrouped view built from two strong augmentations instead of a single one.

pub mod augment;
pub mod data;
pub mod error;
pub mod model;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod select;
pub mod ssl_loss;
pub mod trainer;

pub use error::{Result, SaaError};
pub use scalar::Scalar;

pub type Tensor32 = model::Tensor<f32>;
pub type Tensor64 = model::Tensor<f64>;
pub type Params32 = model::ClassifierParams<f32>;
pub type Params64 = model::ClassifierParams<f64>;
pub type Prediction32 = model::Prediction<f32>;
pub type Prediction64 = model::Prediction<f64>;
pub type History32 = select::SampleHistory<f32>;
pub type History64 = select::SampleHistory<f64>;
pub type Trainer32 = trainer::Trainer<f32>;
pub type Trainer64 = trainer::Trainer<f64>;
