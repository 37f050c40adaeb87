//! Seeded augmentation: weak flip-and-shift, strong RandAugment-style chains with cutout,
//! and the regrouped diverse view given to naive samples.

mod image;
mod ops;
mod pipeline;

pub use image::Image;
pub use ops::{apply_transform, hflip, reflect_index, translate_reflect, AugSpec, StrongOp};
pub use pipeline::{
    cutout, cutout_at, cutout_side, diverse_augment, diverse_augment_traced, patchwise_diverse_augment,
    patchwise_diverse_augment_traced, regroup, strong_augment, strong_augment_traced, student_view,
    weak_augment, AugKind, AugPolicy, Orientation, CUTOUT_FILL, WEAK_SHIFT_FRACTION,
};
