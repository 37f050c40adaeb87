//! CIFAR-10 binary format: each record is one label byte followed by 3072 pixel bytes
//! (1024 red, 1024 green, 1024 blue; row-major 32x32).

use std::path::Path;

use super::{read_file, Dataset, SplitTag};
use crate::augment::Image;
use crate::error::{Result, SaaError};

pub const CIFAR_RECORD_LEN: usize = 1 + 3 * 32 * 32;
const CIFAR_CLASSES: usize = 10;

fn parse_records(bytes: &[u8], path: &Path) -> Result<(Vec<Image>, Vec<usize>)> {
    let mut images = Vec::with_capacity(bytes.len() / CIFAR_RECORD_LEN);
    let mut labels = Vec::with_capacity(bytes.len() / CIFAR_RECORD_LEN);
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        let label = rec[0] as usize;
        if label >= CIFAR_CLASSES {
            return Err(SaaError::format(
                "CIFAR-10",
                format!("{}: record {i} has label byte {label}", path.display()),
            ));
        }
        labels.push(label);
        images.push(Image::from_bytes(3, 32, 32, &rec[1..])?);
    }
    Ok((images, labels))
}

fn read_batch(path: &Path) -> Result<Vec<u8>> {
    read_file(path, |len| {
        if len == 0 || len % CIFAR_RECORD_LEN as u64 != 0 {
            Err(SaaError::format(
                "CIFAR-10",
                format!("{}: size {len} is not a positive multiple of {CIFAR_RECORD_LEN}", path.display()),
            ))
        } else {
            Ok(())
        }
    })
}

/// Loads one binary batch file.
pub fn load_cifar10_file(path: &Path, split: SplitTag) -> Result<Dataset> {
    let bytes = read_batch(path)?;
    let (images, labels) = parse_records(&bytes, path)?;
    Dataset::new(images, Some(labels), CIFAR_CLASSES, split)
}

/// Loads the five training batches and the test batch from `dir`.
pub fn load_cifar10(dir: &Path) -> Result<(Dataset, Dataset)> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for k in 1..=5 {
        let path = dir.join(format!("data_batch_{k}.bin"));
        let bytes = read_batch(&path)?;
        let (im, lb) = parse_records(&bytes, &path)?;
        images.extend(im);
        labels.extend(lb);
    }
    let train = Dataset::new(images, Some(labels), CIFAR_CLASSES, SplitTag::Train)?;
    let test = load_cifar10_file(&dir.join("test_batch.bin"), SplitTag::Test)?;
    Ok((train, test))
}

/// Writes a labeled 3x32x32 dataset in the binary record layout.
pub fn write_cifar10_file(dataset: &Dataset, path: &Path) -> Result<()> {
    if dataset.image_shape() != (3, 32, 32) || dataset.classes() > CIFAR_CLASSES {
        return Err(SaaError::invalid("CIFAR-10 records hold 3x32x32 images with at most 10 classes"));
    }
    let labels = dataset.labels().ok_or_else(|| SaaError::invalid("CIFAR-10 records need labels"))?;
    let mut out = Vec::with_capacity(dataset.len() * CIFAR_RECORD_LEN);
    for (img, &label) in dataset.images().iter().zip(labels) {
        out.push(label as u8);
        out.extend(img.to_bytes());
    }
    std::fs::write(path, out).map_err(|e| SaaError::io(path, e))
}
