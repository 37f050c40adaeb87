//! MNIST IDX files (big-endian headers, unsigned byte payloads).

use std::path::Path;

use super::{read_file, Dataset, SplitTag};
use crate::augment::Image;
use crate::error::{Result, SaaError};

pub const MNIST_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const MNIST_LABEL_MAGIC: u32 = 0x0000_0801;
const MNIST_CLASSES: usize = 10;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("four header bytes"))
}

fn header(path: &Path, words: usize) -> Result<Vec<u32>> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| SaaError::io(path, e))?;
    let mut buf = vec![0u8; 4 * words];
    f.read_exact(&mut buf)
        .map_err(|_| SaaError::format("IDX", format!("{}: truncated header", path.display())))?;
    Ok((0..words).map(|i| be_u32(&buf, 4 * i)).collect())
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> SaaError {
    SaaError::format("IDX", format!("{}: {msg}", path.display()))
}

/// Re-frames a square `src`-sided image to `side` by zero padding or centre cropping.
fn reframe(img: &Image, side: usize) -> Result<Image> {
    let src = img.height();
    if side == src {
        return Ok(img.clone());
    }
    if side > src {
        let off = (side - src) / 2;
        let mut out = Image::filled(1, side, side, 0.0)?;
        out.paste(img, off, off)?;
        Ok(out)
    } else {
        let off = (src - side) / 2;
        img.crop(off, off, side, side)
    }
}

/// Loads an image file and its label file; images are re-framed to `side x side`.
pub fn load_mnist_idx(images: &Path, labels: &Path, side: usize, split: SplitTag) -> Result<Dataset> {
    let ih = header(images, 4)?;
    if ih[0] != MNIST_IMAGE_MAGIC {
        return Err(bad(images, format_args!("bad magic {:#010x}", ih[0])));
    }
    let (count, rows, cols) = (ih[1] as u64, ih[2] as usize, ih[3] as usize);
    if rows != cols || rows == 0 {
        return Err(bad(images, format_args!("expected square images, got {rows}x{cols}")));
    }
    let lh = header(labels, 2)?;
    if lh[0] != MNIST_LABEL_MAGIC {
        return Err(bad(labels, format_args!("bad magic {:#010x}", lh[0])));
    }
    if lh[1] as u64 != count {
        return Err(bad(labels, format_args!("{} labels for {count} images", lh[1])));
    }
    let pixels = (rows * cols) as u64;
    let img_bytes = read_file(images, |len| {
        if len != 16 + count * pixels {
            Err(bad(images, format_args!("length {len}, expected {}", 16 + count * pixels)))
        } else {
            Ok(())
        }
    })?;
    let label_bytes = read_file(labels, |len| {
        if len != 8 + count {
            Err(bad(labels, format_args!("length {len}, expected {}", 8 + count)))
        } else {
            Ok(())
        }
    })?;
    let mut out_labels = Vec::with_capacity(count as usize);
    for (i, &l) in label_bytes[8..].iter().enumerate() {
        if l as usize >= MNIST_CLASSES {
            return Err(bad(labels, format_args!("label {l} at index {i}")));
        }
        out_labels.push(l as usize);
    }
    let out_images = img_bytes[16..]
        .chunks_exact(rows * cols)
        .map(|px| Image::from_bytes(1, rows, cols, px).and_then(|im| reframe(&im, side)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(out_images, Some(out_labels), MNIST_CLASSES, split)
}

/// Loads `train-*` and `t10k-*` IDX files from `dir`.
pub fn load_mnist(dir: &Path, side: usize) -> Result<(Dataset, Dataset)> {
    let train = load_mnist_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
        side,
        SplitTag::Train,
    )?;
    let test = load_mnist_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
        side,
        SplitTag::Test,
    )?;
    Ok((train, test))
}

/// Writes a labeled single-channel square dataset as an IDX image/label pair.
pub fn write_mnist_idx(dataset: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let (c, h, w) = dataset.image_shape();
    if c != 1 || h != w {
        return Err(SaaError::invalid("IDX writer expects single-channel square images"));
    }
    let lbl = dataset.labels().ok_or_else(|| SaaError::invalid("IDX label file needs labels"))?;
    let n = dataset.len() as u32;
    let mut ib = Vec::with_capacity(16 + dataset.len() * h * w);
    for word in [MNIST_IMAGE_MAGIC, n, h as u32, w as u32] {
        ib.extend(word.to_be_bytes());
    }
    for img in dataset.images() {
        ib.extend(img.to_bytes());
    }
    let mut lb = Vec::with_capacity(8 + dataset.len());
    for word in [MNIST_LABEL_MAGIC, n] {
        lb.extend(word.to_be_bytes());
    }
    lb.extend(lbl.iter().map(|&l| l as u8));
    std::fs::write(images, ib).map_err(|e| SaaError::io(images, e))?;
    std::fs::write(labels, lb).map_err(|e| SaaError::io(labels, e))
}
