//! Datasets, loaders, label splits, and on-disk formats.

mod checkpoint;
mod cifar;
mod metrics;
mod mnist;
mod split;
mod synthetic;

use std::path::Path;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use cifar::{load_cifar10, load_cifar10_file, write_cifar10_file, CIFAR_RECORD_LEN};
pub use metrics::{read_metrics, write_metrics, MetricsRecord, MetricsWriter};
pub use mnist::{load_mnist, load_mnist_idx, write_mnist_idx, MNIST_IMAGE_MAGIC, MNIST_LABEL_MAGIC};
pub use split::{split_labels, LabelSplit, SplitSpec};
pub use synthetic::{gen_synthetic, gen_synthetic_spec, template, SyntheticSpec, MAX_SYNTHETIC_CLASSES};

use crate::augment::Image;
use crate::error::{Result, SaaError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
}

/// Images with optional labels. All images share one shape with even height and width.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    images: Vec<Image>,
    labels: Option<Vec<usize>>,
    classes: usize,
    split: SplitTag,
}

impl Dataset {
    pub fn new(images: Vec<Image>, labels: Option<Vec<usize>>, classes: usize, split: SplitTag) -> Result<Self> {
        let first = images.first().ok_or_else(|| SaaError::invalid("dataset is empty"))?;
        let shape = first.shape();
        if shape.1 % 2 != 0 || shape.2 % 2 != 0 {
            return Err(SaaError::Shape(format!("image extents {}x{} must be even", shape.1, shape.2)));
        }
        if let Some(i) = images.iter().position(|im| im.shape() != shape) {
            return Err(SaaError::Shape(format!(
                "image {i} has shape {:?}, expected {shape:?}",
                images[i].shape()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != images.len() {
                return Err(SaaError::Shape(format!("{} labels for {} images", labels.len(), images.len())));
            }
            if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
                return Err(SaaError::invalid(format!("label {bad} outside [0, {classes})")));
            }
        }
        Ok(Dataset { images, labels, classes, split })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &Image {
        &self.images[i]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    /// `(channels, height, width)` shared by all images.
    pub fn image_shape(&self) -> (usize, usize, usize) {
        self.images[0].shape()
    }

    pub fn without_labels(&self) -> Dataset {
        Dataset { labels: None, ..self.clone() }
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let images = indices.iter().map(|&i| self.images[i].clone()).collect();
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Dataset::new(images, labels, self.classes, self.split)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        if let Some(labels) = &self.labels {
            for &l in labels {
                counts[l] += 1;
            }
        }
        counts
    }
}

/// Where a run's images come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    /// Directory with `data_batch_{1..5}.bin` and `test_batch.bin`.
    Cifar10(std::path::PathBuf),
    /// Directory with the four standard IDX files; images are padded or cropped to `side`.
    Mnist { dir: std::path::PathBuf, side: usize },
}

impl DatasetSource {
    /// Loads `(train, test)`.
    pub fn load(&self) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetSource::Synthetic(spec) => gen_synthetic_spec(spec),
            DatasetSource::Cifar10(dir) => load_cifar10(dir),
            DatasetSource::Mnist { dir, side } => load_mnist(dir, *side),
        }
    }
}

pub(crate) fn read_file(path: &Path, expect_len: impl Fn(u64) -> Result<()>) -> Result<Vec<u8>> {
    let meta = std::fs::metadata(path).map_err(|e| SaaError::io(path, e))?;
    expect_len(meta.len())?;
    std::fs::read(path).map_err(|e| SaaError::io(path, e))
}
