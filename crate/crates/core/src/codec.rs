//! Encoder/decoder pipeline and the `PVC1` container.
//!
//! Container layout, little-endian throughout:
//!
//! | field        | type      |
//! |--------------|-----------|
//! | magic        | `"PVC1"`  |
//! | version      | u16       |
//! | precision N  | u8        |
//! | depth D      | u8        |
//! | origin       | 3 × f64   |
//! | scale        | f64       |
//! | model id     | u8 (0 uniform, 1 adaptive, 2 neural) |
//! | model hash   | u64       |
//! | K            | u32       |
//! | symbol count | u64       |
//! | point count  | u64       |
//! | payload      | bytes to end of file |

use std::time::{Duration, Instant};

use crate::context::{
    extract_point_context, AncestorPoints, HybridContext, LevelProgress, NodeCoordinate,
};
use crate::model::{EntropyModel, ModelId, Probability};
use crate::octree::{build_levels, reconstruct_points, LevelOccupancy, NodeKey};
use crate::pcio::{GridFrame, PointCloud, MAX_PRECISION};
use crate::rangecoder::{RangeDecoder, RangeEncoder};
use crate::{Error, Result};

pub use crate::model::{ablation_variant, AblationMode};

pub const CONTAINER_MAGIC: [u8; 4] = *b"PVC1";
pub const CONTAINER_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 69;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub version: u16,
    pub precision: u8,
    pub depth: u8,
    pub origin: [f64; 3],
    pub scale: f64,
    pub model_id: ModelId,
    pub model_hash: u64,
    pub k: u32,
    pub symbol_count: u64,
    pub point_count: u64,
}

impl Header {
    pub fn frame(&self) -> GridFrame {
        GridFrame {
            precision: self.precision,
            origin: self.origin,
            scale: self.scale,
        }
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&CONTAINER_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.precision);
        out.push(self.depth);
        for v in self.origin {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.scale.to_le_bytes());
        out.push(self.model_id as u8);
        out.extend_from_slice(&self.model_hash.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.symbol_count.to_le_bytes());
        out.extend_from_slice(&self.point_count.to_le_bytes());
    }

    pub fn read(bytes: &[u8]) -> Result<Header> {
        if bytes.len() < 4 || bytes[..4] != CONTAINER_MAGIC {
            let mut found = [0u8; 4];
            let n = bytes.len().min(4);
            found[..n].copy_from_slice(&bytes[..n]);
            return Err(Error::BadMagic {
                expected: CONTAINER_MAGIC,
                found,
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Corrupt(format!(
                "container header truncated: {} of {HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CONTAINER_VERSION {
            return Err(Error::UnsupportedVersion(version as u32));
        }
        let model_id = ModelId::from_u8(bytes[40])
            .ok_or_else(|| Error::Corrupt(format!("unknown model id {}", bytes[40])))?;
        let h = Header {
            version,
            precision: bytes[6],
            depth: bytes[7],
            origin: [f64_at(8), f64_at(16), f64_at(24)],
            scale: f64_at(32),
            model_id,
            model_hash: u64_at(41),
            k: u32::from_le_bytes(bytes[49..53].try_into().unwrap()),
            symbol_count: u64_at(53),
            point_count: u64_at(61),
        };
        if h.precision == 0 || h.precision > MAX_PRECISION || h.depth == 0 || h.depth > h.precision
        {
            return Err(Error::Corrupt(format!(
                "invalid precision/depth {}/{} in header",
                h.precision, h.depth
            )));
        }
        if !(h.scale.is_finite() && h.scale > 0.0) || h.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Corrupt("invalid grid frame in header".into()));
        }
        Ok(h)
    }
}

/// Header plus range-coded payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitstream {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        self.header.write(&mut out);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Bitstream> {
        let header = Header::read(bytes)?;
        Ok(Bitstream {
            header,
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }

    /// Size of the serialized container.
    pub fn len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-level coding statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelStats {
    pub level: u8,
    pub symbols: u64,
    pub ones: u64,
    /// `Σ -log2 q(s)` over the level, in bits.
    pub cross_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeReport {
    pub points: u64,
    pub file_bytes: u64,
    pub payload_bytes: u64,
    /// `8 * file_bytes / points`.
    pub bpp: f64,
    /// `8 * payload_bytes / points`.
    pub payload_bpp: f64,
    pub levels: Vec<LevelStats>,
    pub elapsed: Duration,
}

impl EncodeReport {
    pub fn symbols(&self) -> u64 {
        self.levels.iter().map(|l| l.symbols).sum()
    }

    pub fn cross_entropy(&self) -> f64 {
        self.levels.iter().map(|l| l.cross_entropy).sum()
    }
}

/// One coded symbol as seen by either side of the codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub context_digest: u64,
    pub probability: u16,
    pub bit: bool,
}

/// Walks the octree level by level in coding order, building each node's
/// context and asking `code` for its bit. Shared by encoder and decoder.
fn code_levels<M, F>(
    precision: u8,
    depth: u8,
    model: &mut M,
    symbol_limit: u64,
    mut trace: Option<&mut Vec<TraceRecord>>,
    stats: &mut Vec<LevelStats>,
    mut code: F,
) -> Result<Vec<LevelOccupancy>>
where
    M: EntropyModel + ?Sized,
    F: FnMut(&NodeKey, Probability) -> Result<bool>,
{
    let k = model.point_context_size();
    let mut levels = vec![LevelOccupancy::root()];
    let mut coded = 0u64;
    for d in 1..=depth {
        let parents = levels.last().unwrap();
        coded += parents.len() as u64 * 8;
        if coded > symbol_limit {
            return Err(Error::Corrupt(format!(
                "level {d} needs more symbols than the header declares"
            )));
        }
        let ancestors = k.map(|_| AncestorPoints::from_level(parents, precision));
        let mut progress = LevelProgress::new(parents);
        let mut cells = Vec::new();
        let mut level_stats = LevelStats {
            level: d,
            ..Default::default()
        };
        let mut parent_has_child = false;
        for (n, key) in parents.children().enumerate() {
            let ctx = HybridContext {
                key,
                vox: progress.voxel_context(&key),
                pc: ancestors
                    .as_ref()
                    .map(|a| extract_point_context(&key, a, k.unwrap())),
                coord: NodeCoordinate::new(&key, precision),
            };
            let p = model.predict(&ctx);
            let bit = code(&key, p)?;
            model.update(&ctx, bit);
            progress.push(bit);

            level_stats.symbols += 1;
            level_stats.ones += bit as u64;
            level_stats.cross_entropy += p.cost_bits(bit);
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceRecord {
                    context_digest: ctx.digest(),
                    probability: p.quantized(),
                    bit,
                });
            }
            parent_has_child |= bit;
            if bit {
                cells.push(key.cell);
            }
            if n % 8 == 7 {
                if !parent_has_child {
                    return Err(Error::Corrupt(format!(
                        "occupied cell {:?} at level {} has no occupied child",
                        key.parent().cell,
                        d - 1
                    )));
                }
                parent_has_child = false;
            }
        }
        stats.push(level_stats);
        levels.push(LevelOccupancy::new(d, cells));
    }
    Ok(levels)
}

pub fn encode<M: EntropyModel + ?Sized>(
    pc: &PointCloud,
    depth: u8,
    model: &mut M,
) -> Result<(Bitstream, EncodeReport)> {
    encode_traced(pc, depth, model, None)
}

/// [`encode`], optionally logging every coded symbol.
pub fn encode_traced<M: EntropyModel + ?Sized>(
    pc: &PointCloud,
    depth: u8,
    model: &mut M,
    trace: Option<&mut Vec<TraceRecord>>,
) -> Result<(Bitstream, EncodeReport)> {
    let start = Instant::now();
    let target = build_levels(pc, depth)?;
    let frame = pc.frame();
    let mut enc = RangeEncoder::new();
    let mut stats = Vec::with_capacity(depth as usize);
    let coded = code_levels(
        frame.precision,
        depth,
        model,
        u64::MAX,
        trace,
        &mut stats,
        |key, p| {
            let bit = target[key.level as usize].contains(&key.cell);
            enc.encode(bit, p);
            Ok(bit)
        },
    )?;
    debug_assert_eq!(coded, target);
    let payload = enc.finish();
    let symbol_count = stats.iter().map(|s| s.symbols).sum();
    let header = Header {
        version: CONTAINER_VERSION,
        precision: frame.precision,
        depth,
        origin: frame.origin,
        scale: frame.scale,
        model_id: model.id(),
        model_hash: model.fingerprint(),
        k: model.point_context_size().unwrap_or(0) as u32,
        symbol_count,
        point_count: pc.len() as u64,
    };
    let bs = Bitstream { header, payload };
    let points = pc.len() as u64;
    let report = EncodeReport {
        points,
        file_bytes: bs.len() as u64,
        payload_bytes: bs.payload.len() as u64,
        bpp: 8.0 * bs.len() as f64 / points as f64,
        payload_bpp: 8.0 * bs.payload.len() as f64 / points as f64,
        levels: stats,
        elapsed: start.elapsed(),
    };
    Ok((bs, report))
}

pub fn decode<M: EntropyModel + ?Sized>(bs: &Bitstream, model: &mut M) -> Result<PointCloud> {
    decode_traced(bs, model, None)
}

fn check_model<M: EntropyModel + ?Sized>(h: &Header, model: &M) -> Result<()> {
    if h.model_id != model.id() {
        return Err(Error::WrongModel(format!(
            "stream was coded with the {} model, decoder has {}",
            h.model_id,
            model.id()
        )));
    }
    if h.model_hash != model.fingerprint() {
        return Err(Error::ModelMismatch {
            header: h.model_hash,
            model: model.fingerprint(),
        });
    }
    let k = model.point_context_size().unwrap_or(0) as u32;
    if k != h.k {
        return Err(Error::WrongModel(format!(
            "stream uses K = {}, model uses K = {k}",
            h.k
        )));
    }
    Ok(())
}

/// [`decode`], optionally logging every decoded symbol.
pub fn decode_traced<M: EntropyModel + ?Sized>(
    bs: &Bitstream,
    model: &mut M,
    trace: Option<&mut Vec<TraceRecord>>,
) -> Result<PointCloud> {
    let h = bs.header;
    check_model(&h, model)?;
    let mut dec = RangeDecoder::new(&bs.payload)?;
    let mut stats = Vec::new();
    let levels = code_levels(
        h.precision,
        h.depth,
        model,
        h.symbol_count,
        trace,
        &mut stats,
        |_, p| dec.decode(p),
    )?;
    let symbols: u64 = stats.iter().map(|s| s.symbols).sum();
    if symbols != h.symbol_count {
        return Err(Error::Corrupt(format!(
            "decoded {symbols} symbols, header declares {}",
            h.symbol_count
        )));
    }
    if dec.remaining() != 0 {
        return Err(Error::Corrupt(format!(
            "{} unread payload bytes",
            dec.remaining()
        )));
    }
    let pc = reconstruct_points(&levels, h.depth, h.frame())?;
    if h.depth == h.precision && pc.len() as u64 != h.point_count {
        return Err(Error::Corrupt(format!(
            "decoded {} points, header declares {}",
            pc.len(),
            h.point_count
        )));
    }
    Ok(pc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdaptiveModel, UniformModel};

    #[test]
    fn single_point_uniform() {
        let pc = PointCloud::from_grid(vec![[0, 0, 0]], 1).unwrap();
        let (bs, report) = encode(&pc, 1, &mut UniformModel).unwrap();
        assert_eq!(bs.header.symbol_count, 8);
        assert!(bs.payload.len() <= 2 + 5, "{}", bs.payload.len());
        assert_eq!(report.file_bytes, (HEADER_LEN + bs.payload.len()) as u64);
        assert_eq!(report.bpp, 8.0 * report.file_bytes as f64);
        let back = Bitstream::from_bytes(&bs.to_bytes()).unwrap();
        assert_eq!(back, bs);
        assert_eq!(decode(&back, &mut UniformModel).unwrap(), pc);
    }

    #[test]
    fn header_layout() {
        let pc = PointCloud::from_grid(vec![[1, 2, 3], [4, 5, 6]], 3).unwrap();
        let (bs, _) = encode(&pc, 3, &mut AdaptiveModel::new()).unwrap();
        let bytes = bs.to_bytes();
        assert_eq!(&bytes[..4], b"PVC1");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!((bytes[6], bytes[7]), (3, 3));
        assert_eq!(bytes[40], 1);
        assert_eq!(u64::from_le_bytes(bytes[61..69].try_into().unwrap()), 2);
    }

    #[test]
    fn wrong_model_rejected() {
        let pc = PointCloud::from_grid(vec![[1, 2, 3], [4, 5, 6]], 3).unwrap();
        let (bs, _) = encode(&pc, 3, &mut AdaptiveModel::new()).unwrap();
        assert!(matches!(
            decode(&bs, &mut UniformModel),
            Err(Error::WrongModel(_))
        ));
        let mut tampered = bs.clone();
        tampered.header.model_hash ^= 1;
        assert!(matches!(
            decode(&tampered, &mut AdaptiveModel::new()),
            Err(Error::ModelMismatch { .. })
        ));
    }

    #[test]
    fn bad_containers() {
        assert!(matches!(
            Bitstream::from_bytes(b"PVX1"),
            Err(Error::BadMagic { .. })
        ));
        assert!(matches!(
            Bitstream::from_bytes(b"PVC1\x01\x00"),
            Err(Error::Corrupt(_))
        ));
        let pc = PointCloud::from_grid(vec![[1, 2, 3], [4, 5, 6], [7, 7, 0]], 3).unwrap();
        let (bs, _) = encode(&pc, 3, &mut AdaptiveModel::new()).unwrap();
        let mut bytes = bs.to_bytes();
        bytes[4] = 9;
        assert!(matches!(
            Bitstream::from_bytes(&bytes),
            Err(Error::UnsupportedVersion(9))
        ));

        let mut truncated = bs.clone();
        truncated.payload.truncate(truncated.payload.len() - 3);
        assert!(decode(&truncated, &mut AdaptiveModel::new()).is_err());
        let mut padded = bs.clone();
        padded.payload.push(0);
        assert!(matches!(
            decode(&padded, &mut AdaptiveModel::new()),
            Err(Error::Corrupt(_))
        ));
    }
}
