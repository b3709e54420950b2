//! Training-sample dumps (`PVS1`): one record per coded octree symbol.
//!
//! Layout, little-endian:
//!
//! ```text
//! "PVS1"  u32 version  u32 K  u64 count
//! count × {
//!     u8 level   3 × u32 cell   64 × i8 voxel context
//!     u32 valid neighbors   K × 3 × f32 point context
//!     4 × f32 coordinate    u8 label
//! }
//! ```
//!
//! Records appear in coding order. The voxel context is indexed
//! `x * 16 + y * 4 + z`.

use std::path::Path;

use crate::codec::encode;
use crate::context::{HybridContext, PointContext, VoxelContext, WINDOW_CELLS};
use crate::model::{EntropyModel, ModelId, Probability};
use crate::octree::NodeKey;
use crate::pcio::PointCloud;
use crate::{Error, Result};

pub const PVS_MAGIC: [u8; 4] = *b"PVS1";
pub const PVS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub key: NodeKey,
    pub vox: VoxelContext,
    pub pc: PointContext,
    pub coord: [f32; 4],
    pub label: bool,
}

impl TrainingSample {
    fn record_len(k: usize) -> usize {
        1 + 12 + WINDOW_CELLS + 4 + 12 * k + 16 + 1
    }
}

/// Stand-in model that captures each context and its symbol.
struct Recorder {
    k: usize,
    samples: Vec<TrainingSample>,
}

impl EntropyModel for Recorder {
    fn id(&self) -> ModelId {
        ModelId::Uniform
    }

    fn fingerprint(&self) -> u64 {
        0
    }

    fn point_context_size(&self) -> Option<usize> {
        Some(self.k)
    }

    fn predict(&mut self, _ctx: &HybridContext) -> Probability {
        Probability::HALF
    }

    fn update(&mut self, ctx: &HybridContext, bit: bool) {
        self.samples.push(TrainingSample {
            key: ctx.key,
            vox: ctx.vox,
            pc: ctx.pc.clone().expect("recorder requests point contexts"),
            coord: ctx.coord.0,
            label: bit,
        });
    }
}

/// Every symbol of the octree of `pc` down to `depth`, with its contexts.
pub fn collect_samples(pc: &PointCloud, depth: u8, k: usize) -> Result<Vec<TrainingSample>> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let mut rec = Recorder {
        k,
        samples: Vec::new(),
    };
    encode(pc, depth, &mut rec)?;
    Ok(rec.samples)
}

pub fn samples_to_bytes(samples: &[TrainingSample], k: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + samples.len() * TrainingSample::record_len(k));
    out.extend_from_slice(&PVS_MAGIC);
    out.extend_from_slice(&PVS_VERSION.to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        if s.pc.k() != k {
            return Err(Error::InvalidInput(format!(
                "sample has {} point rows, dump uses K = {k}",
                s.pc.k()
            )));
        }
        out.push(s.key.level);
        for c in s.key.cell {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend(s.vox.cells().iter().map(|&c| c as u8));
        out.extend_from_slice(&(s.pc.valid_count() as u32).to_le_bytes());
        for row in s.pc.rows() {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in s.coord {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(s.label as u8);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Corrupt(format!(
                "sample dump truncated at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses a dump, returning `(K, samples)`.
pub fn samples_from_bytes(bytes: &[u8]) -> Result<(usize, Vec<TrainingSample>)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4).map_err(|_| Error::BadMagic {
        expected: PVS_MAGIC,
        found: [0; 4],
    })?;
    if magic != PVS_MAGIC {
        return Err(Error::BadMagic {
            expected: PVS_MAGIC,
            found: magic.try_into().unwrap(),
        });
    }
    let version = r.u32()?;
    if version != PVS_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let k = r.u32()? as usize;
    let count = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
    let body = (bytes.len() - r.pos) as u64;
    if count.checked_mul(TrainingSample::record_len(k) as u64) != Some(body) {
        return Err(Error::Corrupt(format!(
            "sample dump declares {count} records of K = {k} but has {body} body bytes"
        )));
    }
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let level = r.take(1)?[0];
        let cell = [r.u32()?, r.u32()?, r.u32()?];
        let mut cells = [0i8; WINDOW_CELLS];
        for (c, &b) in cells.iter_mut().zip(r.take(WINDOW_CELLS)?) {
            *c = b as i8;
        }
        let valid = r.u32()? as usize;
        let mut rows = Vec::with_capacity(k);
        for _ in 0..k {
            rows.push([r.f32()?, r.f32()?, r.f32()?]);
        }
        let coord = [r.f32()?, r.f32()?, r.f32()?, r.f32()?];
        let label = match r.take(1)?[0] {
            0 => false,
            1 => true,
            other => return Err(Error::Corrupt(format!("label byte {other}"))),
        };
        samples.push(TrainingSample {
            key: NodeKey::new(level, cell),
            vox: VoxelContext::from_cells(cells),
            pc: PointContext::new(rows, valid),
            coord,
            label,
        });
    }
    Ok((k, samples))
}

pub fn write_samples(path: &Path, samples: &[TrainingSample], k: usize) -> Result<()> {
    crate::write_file(path, &samples_to_bytes(samples, k)?)?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<(usize, Vec<TrainingSample>)> {
    samples_from_bytes(&crate::read_file(path)?)
}
