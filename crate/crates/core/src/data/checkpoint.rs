//! Checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "SAACKPT\0"
//! version  u32
//! arch     u64      architecture hash
//! count    u32      number of tensors
//! repeated count times:
//!   name_len u32, name (UTF-8), rank u32, extents u64 × rank, data f32 × Π extents
//! ```

use std::path::Path;

use crate::error::{Result, SaaError};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SAACKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(SaaError::Shape(format!("{name}: shape {shape:?} vs {} values", data.len())));
        }
        Ok(NamedTensor { name, shape, data })
    }

    /// Stores integers bit-for-bit in the `f32` payload.
    pub fn from_u32(name: impl Into<String>, values: &[u32]) -> Self {
        NamedTensor { name: name.into(), shape: vec![values.len()], data: values.iter().map(|&v| f32::from_bits(v)).collect() }
    }

    pub fn from_u64(name: impl Into<String>, values: &[u64]) -> Self {
        let words: Vec<u32> = values.iter().flat_map(|&v| [v as u32, (v >> 32) as u32]).collect();
        Self::from_u32(name, &words)
    }

    /// Stores scalars exactly. 64-bit values take two words, recorded as a trailing extent of 2.
    pub fn from_scalars<T: Scalar>(name: impl Into<String>, shape: &[usize], values: &[T]) -> Self {
        let name = name.into();
        if T::BITS == 32 {
            let data = values.iter().map(|v| f32::from_bits(v.to_raw_bits() as u32)).collect();
            NamedTensor { name, shape: shape.to_vec(), data }
        } else {
            let words: Vec<u64> = values.iter().map(|v| v.to_raw_bits()).collect();
            let mut t = Self::from_u64(name, &words);
            t.shape = shape.iter().copied().chain([2]).collect();
            t
        }
    }

    /// Inverse of [`NamedTensor::from_scalars`]; checks the logical shape.
    pub fn to_scalars<T: Scalar>(&self, shape: &[usize]) -> Result<Vec<T>> {
        let stored: Vec<usize> = if T::BITS == 32 { shape.to_vec() } else { shape.iter().copied().chain([2]).collect() };
        if self.shape != stored {
            return Err(SaaError::format(
                "checkpoint",
                format!("{}: stored shape {:?}, expected {:?} for {}", self.name, self.shape, stored, T::NAME),
            ));
        }
        if T::BITS == 32 {
            Ok(self.data.iter().map(|v| T::from_raw_bits(v.to_bits() as u64)).collect())
        } else {
            Ok(self.to_u64()?.into_iter().map(T::from_raw_bits).collect())
        }
    }

    pub fn to_u32(&self) -> Vec<u32> {
        self.data.iter().map(|v| v.to_bits()).collect()
    }

    pub fn to_u64(&self) -> Result<Vec<u64>> {
        let words = self.to_u32();
        if words.len() % 2 != 0 {
            return Err(SaaError::format("checkpoint", format!("{}: odd word count for u64 tensor", self.name)));
        }
        Ok(words.chunks(2).map(|w| w[0] as u64 | (w[1] as u64) << 32).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub arch_hash: u64,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| SaaError::format("checkpoint", format!("missing tensor `{name}`")))
    }

    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a NamedTensor> + 'a {
        self.tensors.iter().filter(move |t| t.name.starts_with(prefix))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend(CHECKPOINT_VERSION.to_le_bytes());
        out.extend(self.arch_hash.to_le_bytes());
        out.extend((self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend((t.name.len() as u32).to_le_bytes());
            out.extend(t.name.as_bytes());
            out.extend((t.shape.len() as u32).to_le_bytes());
            for &e in &t.shape {
                out.extend((e as u64).to_le_bytes());
            }
            for &v in &t.data {
                out.extend(v.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(SaaError::format("checkpoint", "bad magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(SaaError::Version { expected: CHECKPOINT_VERSION, found: version });
        }
        let arch_hash = r.u64()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| SaaError::format("checkpoint", "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(16));
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .ok_or_else(|| SaaError::format("checkpoint", format!("{name}: extent overflow")))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| SaaError::format("checkpoint", "size overflow"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().expect("4 bytes"))))
                .collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(SaaError::format("checkpoint", "trailing bytes"));
        }
        Ok(Checkpoint { arch_hash, tensors })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            SaaError::format("checkpoint", format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, ckpt.encode()).map_err(|e| SaaError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| SaaError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| SaaError::io(path, e))?;
    Checkpoint::decode(&bytes)
}
