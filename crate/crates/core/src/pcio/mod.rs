//! Point-cloud file I/O and grid quantization.

mod ply;
mod xyz;

use std::path::Path;

use crate::{Error, Result};

pub use ply::{read_ply, write_ply, PlyEncoding};
pub use xyz::{read_xyz, write_xyz};

/// Largest supported grid precision in bits.
pub const MAX_PRECISION: u8 = 16;

/// A point cloud in source units, as read from disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawPointCloud {
    pub points: Vec<[f64; 3]>,
}

impl RawPointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        RawPointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The affine frame that maps grid coordinates back to source units:
/// `real = origin + scale * grid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrame {
    pub precision: u8,
    pub origin: [f64; 3],
    pub scale: f64,
}

impl GridFrame {
    /// Unit frame at the given precision: origin zero, one unit per grid step.
    pub fn unit(precision: u8) -> Self {
        GridFrame {
            precision,
            origin: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn max_coord(&self) -> u32 {
        ((1u64 << self.precision) - 1) as u32
    }

    /// Maps a real point into (unrounded) grid units of this frame.
    pub fn to_grid(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.scale,
            (p[1] - self.origin[1]) / self.scale,
            (p[2] - self.origin[2]) / self.scale,
        ]
    }
}

/// A deduplicated point cloud on an `N`-bit integer grid.
///
/// Points are kept sorted lexicographically, so two clouds with the same
/// point set compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[u32; 3]>,
    frame: GridFrame,
}

impl PointCloud {
    /// Builds a cloud from grid points, sorting and deduplicating them.
    pub fn new(mut points: Vec<[u32; 3]>, frame: GridFrame) -> Result<Self> {
        check_precision(frame.precision)?;
        if !(frame.scale.is_finite() && frame.scale > 0.0)
            || frame.origin.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "grid frame must have finite origin and positive scale, got origin {:?} scale {}",
                frame.origin, frame.scale
            )));
        }
        let max = frame.max_coord();
        if let Some(p) = points.iter().find(|p| p.iter().any(|&c| c > max)) {
            return Err(Error::InvalidInput(format!(
                "point {p:?} outside the {}-bit grid",
                frame.precision
            )));
        }
        points.sort_unstable();
        points.dedup();
        Ok(PointCloud { points, frame })
    }

    /// Grid points with the unit frame.
    pub fn from_grid(points: Vec<[u32; 3]>, precision: u8) -> Result<Self> {
        Self::new(points, GridFrame::unit(precision))
    }

    pub fn points(&self) -> &[[u32; 3]] {
        &self.points
    }

    pub fn frame(&self) -> GridFrame {
        self.frame
    }

    pub fn precision(&self) -> u8 {
        self.frame.precision
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid coordinates as reals, for the metrics module.
    pub fn grid_points_f64(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
            .collect()
    }
}

fn check_precision(bits: u8) -> Result<()> {
    if bits == 0 || bits > MAX_PRECISION {
        return Err(Error::InvalidInput(format!(
            "precision must be in 1..={MAX_PRECISION} bits, got {bits}"
        )));
    }
    Ok(())
}

/// Quantizes a raw cloud onto the `bits`-bit grid spanned by its bounding cube.
///
/// The origin is the per-axis minimum and the scale is the longest axis
/// extent divided by `2^bits - 1` (1 for a zero-extent cloud). Rounded
/// coordinates are clamped into range and duplicates removed.
pub fn quantize(raw: &RawPointCloud, bits: u8) -> Result<PointCloud> {
    check_precision(bits)?;
    if raw.is_empty() {
        return Err(Error::InvalidInput(
            "cannot quantize an empty point cloud".into(),
        ));
    }
    if let Some(p) = raw.points.iter().find(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "non-finite coordinate in {p:?}"
        )));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &raw.points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let max = ((1u64 << bits) - 1) as f64;
    let scale = if extent > 0.0 { extent / max } else { 1.0 };
    let frame = GridFrame {
        precision: bits,
        origin: lo,
        scale,
    };
    let points = raw
        .points
        .iter()
        .map(|p| {
            let g = frame.to_grid(*p);
            g.map(|v| v.round().clamp(0.0, max) as u32)
        })
        .collect();
    PointCloud::new(points, frame)
}

/// Maps grid points back to source units: `origin + scale * p`.
pub fn dequantize(pc: &PointCloud) -> RawPointCloud {
    let f = pc.frame;
    RawPointCloud::new(
        pc.points
            .iter()
            .map(|p| {
                [
                    f.origin[0] + f.scale * p[0] as f64,
                    f.origin[1] + f.scale * p[1] as f64,
                    f.origin[2] + f.scale * p[2] as f64,
                ]
            })
            .collect(),
    )
}

/// On-disk point-cloud formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Ply,
    Xyz,
}

impl Format {
    /// Guesses the format from a file extension (`.ply`, `.xyz`, `.txt`).
    pub fn from_path(path: &Path) -> Option<Format> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ply" => Some(Format::Ply),
            "xyz" | "txt" => Some(Format::Xyz),
            _ => None,
        }
    }
}

fn resolve_format(path: &Path, format: Option<Format>) -> Result<Format> {
    format.or_else(|| Format::from_path(path)).ok_or_else(|| {
        Error::Config(format!(
            "cannot infer point-cloud format of {}; use a .ply or .xyz extension",
            path.display()
        ))
    })
}

/// Reads a point cloud, inferring the format from the extension when `format` is `None`.
pub fn read_point_cloud(path: &Path, format: Option<Format>) -> Result<RawPointCloud> {
    let format = resolve_format(path, format)?;
    let bytes = crate::read_file(path)?;
    match format {
        Format::Ply => read_ply(&bytes),
        Format::Xyz => read_xyz(&bytes),
    }
}

/// Writes a point cloud; PLY output uses the given encoding.
pub fn write_point_cloud(
    path: &Path,
    cloud: &RawPointCloud,
    format: Option<Format>,
    encoding: PlyEncoding,
) -> Result<()> {
    let format = resolve_format(path, format)?;
    let bytes = match format {
        Format::Ply => write_ply(cloud, encoding),
        Format::Xyz => write_xyz(cloud),
    };
    crate::write_file(path, &bytes)?;
    Ok(())
}
