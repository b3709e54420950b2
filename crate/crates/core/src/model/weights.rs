//! PVW weight files: a flat container of named little-endian `f32` arrays.
//!
//! ```text
//! "PVW1"  u32 schema_version  u32 architecture  u32 k  u32 array_count
//! per array:
//!   u16 name_len  name (UTF-8)  u8 dtype (0 = f32)  u8 rank  u32 dims[rank]
//!   row-major payload
//! ```
//! All integers are little-endian. Architecture 0 denotes a generic bundle
//! with no required arrays (used for parity fixtures).

use std::path::Path;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use super::neural::Architecture;
use crate::{Error, Result};

pub const PVW_MAGIC: [u8; 4] = *b"PVW1";
pub const PVW_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<u32>, data: Vec<f32>) -> Self {
        assert_eq!(
            shape.iter().map(|&d| d as usize).product::<usize>(),
            data.len(),
            "tensor data does not match shape {shape:?}"
        );
        Tensor { shape, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub schema_version: u32,
    pub architecture: u32,
    pub k: u32,
    arrays: IndexMap<String, Tensor>,
}

impl ModelWeights {
    pub fn new(architecture: u32, k: u32) -> Self {
        ModelWeights {
            schema_version: PVW_SCHEMA_VERSION,
            architecture,
            k,
            arrays: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.arrays.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.arrays.get(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.arrays.shift_remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.arrays.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    /// Array by name, or an error naming it.
    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Weights(format!("missing array '{name}'")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.arrays.values().map(|t| t.len() * 4).sum();
        let mut out = Vec::with_capacity(20 + payload + self.arrays.len() * 64);
        out.extend_from_slice(&PVW_MAGIC);
        out.extend_from_slice(&self.schema_version.to_le_bytes());
        out.extend_from_slice(&self.architecture.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, t) in &self.arrays {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DType::F32 as u8);
            out.push(t.shape.len() as u8);
            for d in &t.shape {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses the container without checking it against an architecture.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != PVW_MAGIC {
            return Err(Error::Weights(format!(
                "bad magic {magic:?}, expected {PVW_MAGIC:?}"
            )));
        }
        let schema_version = r.u32("schema version")?;
        if schema_version != PVW_SCHEMA_VERSION {
            return Err(Error::Weights(format!(
                "unsupported schema version {schema_version}"
            )));
        }
        let architecture = r.u32("architecture id")?;
        let k = r.u32("k")?;
        let count = r.u32("array count")?;
        let mut w = ModelWeights {
            schema_version,
            architecture,
            k,
            arrays: IndexMap::new(),
        };
        for _ in 0..count {
            let len = u16::from_le_bytes(r.take(2, "name length")?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(r.take(len, "array name")?)
                .map_err(|_| {
                    Error::Weights(format!("array name at byte {} is not UTF-8", r.pos - len))
                })?
                .to_string();
            let dtype = r.take(1, &name)?[0];
            if dtype != DType::F32 as u8 {
                return Err(Error::Weights(format!(
                    "array '{name}' has unsupported dtype {dtype}"
                )));
            }
            let rank = r.take(1, &name)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32(&name)?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
                .ok_or_else(|| Error::Weights(format!("array '{name}' is too large")))?;
            let raw = r.take(n.saturating_mul(4), &name)?;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Weights(format!(
                    "array '{name}' contains non-finite values"
                )));
            }
            if w.arrays
                .insert(name.clone(), Tensor { shape, data })
                .is_some()
            {
                return Err(Error::Weights(format!("duplicate array '{name}'")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Weights(format!(
                "{} trailing bytes after the last array",
                bytes.len() - r.pos
            )));
        }
        Ok(w)
    }

    /// Checks the arrays against the declared architecture: every required
    /// array present with its exact shape and nothing else.
    pub fn validate(&self) -> Result<()> {
        if self.architecture == 0 {
            return Ok(());
        }
        let arch = Architecture::from_id(self.architecture).ok_or_else(|| {
            Error::Weights(format!("unknown architecture id {}", self.architecture))
        })?;
        if self.k == 0 {
            return Err(Error::Weights("k must be at least 1".into()));
        }
        let expected = arch.expected_arrays();
        for (name, shape) in &expected {
            let t = self.require(name)?;
            if &t.shape != shape {
                return Err(Error::Weights(format!(
                    "array '{name}' has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
        }
        if let Some(extra) = self
            .arrays
            .keys()
            .find(|n| !expected.iter().any(|(e, _)| e == *n))
        {
            return Err(Error::Weights(format!("unexpected array '{extra}'")));
        }
        Ok(())
    }

    /// First eight bytes (little-endian) of the SHA-256 of the serialized file.
    pub fn fingerprint(&self) -> u64 {
        file_fingerprint(&self.to_bytes())
    }
}

pub(crate) fn file_fingerprint(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if n > self.bytes.len() - self.pos {
            return Err(Error::Weights(format!(
                "file truncated at byte {} while reading {what}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Reads and validates a PVW file.
pub fn load_weights(path: &Path) -> Result<ModelWeights> {
    let bytes = crate::read_file(path)?;
    let w = ModelWeights::from_bytes(&bytes)?;
    w.validate()?;
    Ok(w)
}

pub fn save_weights(weights: &ModelWeights, path: &Path) -> Result<()> {
    crate::write_file(path, &weights.to_bytes())?;
    Ok(())
}
