//! Hybrid per-node context: causal voxel window, ancestor point neighbors,
//! and the normalized node coordinate.

mod kdtree;

use rustc_hash::FxHashMap;

use crate::octree::{cell_center, child_index, Cell, LevelOccupancy, NodeKey};

pub use kdtree::{knn, KdTree, EXHAUSTIVE_LIMIT};

/// Edge length of the voxel window.
pub const WINDOW: usize = 4;
/// Number of cells in the voxel window.
pub const WINDOW_CELLS: usize = WINDOW * WINDOW * WINDOW;
/// Local index of the current cell inside the window; the window spans
/// offsets `-1..=2` on every axis.
pub const ANCHOR: usize = 1;

/// Cell value for a same-level cell that is not yet coded.
pub const UNKNOWN: i8 = -1;
pub const EMPTY: i8 = 0;
pub const OCCUPIED: i8 = 1;

/// 4×4×4 ternary occupancy window, indexed `x * 16 + y * 4 + z` in local
/// coordinates (`local = offset + 1`).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct VoxelContext {
    cells: [i8; WINDOW_CELLS],
}

impl VoxelContext {
    pub fn from_cells(cells: [i8; WINDOW_CELLS]) -> Self {
        VoxelContext { cells }
    }

    #[inline]
    pub fn index(x: usize, y: usize, z: usize) -> usize {
        (x * WINDOW + y) * WINDOW + z
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> i8 {
        self.cells[Self::index(x, y, z)]
    }

    pub fn cells(&self) -> &[i8; WINDOW_CELLS] {
        &self.cells
    }

    pub fn anchor(&self) -> i8 {
        self.get(ANCHOR, ANCHOR, ANCHOR)
    }
}

impl std::fmt::Debug for VoxelContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: String = self
            .cells
            .iter()
            .map(|&c| match c {
                UNKNOWN => '?',
                EMPTY => '.',
                _ => '#',
            })
            .collect();
        f.debug_tuple("VoxelContext").field(&s).finish()
    }
}

/// `K` ancestor-level neighbors relative to the node center, in units of the
/// ancestor cell size. Rows past `valid_count` repeat row 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PointContext {
    rows: Vec<[f32; 3]>,
    valid_count: usize,
}

impl PointContext {
    pub fn new(rows: Vec<[f32; 3]>, valid_count: usize) -> Self {
        debug_assert!(valid_count >= 1 && valid_count <= rows.len());
        PointContext { rows, valid_count }
    }

    pub fn rows(&self) -> &[[f32; 3]] {
        &self.rows
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn valid_count(&self) -> usize {
        self.valid_count
    }
}

/// `(x / 2^d, y / 2^d, z / 2^d, d / N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCoordinate(pub [f32; 4]);

impl NodeCoordinate {
    pub fn new(key: &NodeKey, precision: u8) -> Self {
        let side = (1u64 << key.level) as f64;
        NodeCoordinate([
            (key.cell[0] as f64 / side) as f32,
            (key.cell[1] as f64 / side) as f32,
            (key.cell[2] as f64 / side) as f32,
            (key.level as f64 / precision as f64) as f32,
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridContext {
    pub key: NodeKey,
    pub vox: VoxelContext,
    /// Present only when the consuming model reads point neighbors.
    pub pc: Option<PointContext>,
    pub coord: NodeCoordinate,
}

impl HybridContext {
    /// 64-bit FNV-1a digest over every field, used by replay logs.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        h.write(&[self.key.level]);
        for c in self.key.cell {
            h.write(&c.to_le_bytes());
        }
        h.write(&self.vox.cells.map(|c| c as u8));
        for v in self.coord.0 {
            h.write(&v.to_bits().to_le_bytes());
        }
        if let Some(pc) = &self.pc {
            h.write(&(pc.valid_count as u32).to_le_bytes());
            for r in &pc.rows {
                for v in r {
                    h.write(&v.to_bits().to_le_bytes());
                }
            }
        }
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Same-level coding state: which candidates of the level being coded have
/// been decided so far.
///
/// Candidate `8 * p + m` is child `m` (Morton) of the `p`-th occupied parent
/// in lexicographic order; it is decoded once `bits.len() > 8 * p + m`.
pub struct LevelProgress<'a> {
    level: u8,
    parents: &'a LevelOccupancy,
    parent_index: FxHashMap<Cell, u32>,
    bits: Vec<bool>,
    neighborhood: Option<(Cell, [Option<u32>; 27])>,
}

impl<'a> LevelProgress<'a> {
    /// Starts coding the level below `parents`.
    pub fn new(parents: &'a LevelOccupancy) -> Self {
        let mut parent_index = FxHashMap::default();
        parent_index.reserve(parents.len());
        for (i, c) in parents.cells().iter().enumerate() {
            parent_index.insert(*c, i as u32);
        }
        LevelProgress {
            level: parents.level() + 1,
            parents,
            parent_index,
            bits: Vec::with_capacity(parents.len() * 8),
            neighborhood: None,
        }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn parents(&self) -> &LevelOccupancy {
        self.parents
    }

    /// Symbols decided so far at this level.
    pub fn decided(&self) -> &[bool] {
        &self.bits
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// State of a same-level cell given by signed coordinates.
    pub fn state(&self, cell: [i64; 3]) -> i8 {
        let side = 1i64 << self.level;
        if cell.iter().any(|&c| c < 0 || c >= side) {
            return EMPTY;
        }
        let cell = cell.map(|c| c as u32);
        match self.parent_index.get(&cell.map(|c| c >> 1)) {
            None => EMPTY,
            Some(&p) => self.state_at(p, child_index(cell)),
        }
    }

    #[inline]
    fn state_at(&self, parent: u32, morton: u8) -> i8 {
        match self.bits.get(parent as usize * 8 + morton as usize) {
            None => UNKNOWN,
            Some(true) => OCCUPIED,
            Some(false) => EMPTY,
        }
    }

    /// The voxel window for `key`, reusing parent lookups across siblings.
    pub fn voxel_context(&mut self, key: &NodeKey) -> VoxelContext {
        debug_assert_eq!(key.level, self.level);
        let parent = key.cell.map(|c| c >> 1);
        let side = 1i64 << (self.level - 1);
        if self.neighborhood.map(|(p, _)| p) != Some(parent) {
            let mut table = [None; 27];
            for (n, slot) in table.iter_mut().enumerate() {
                let off = [n / 9, (n / 3) % 3, n % 3];
                let q: [i64; 3] = std::array::from_fn(|a| parent[a] as i64 + off[a] as i64 - 1);
                if q.iter().all(|&v| v >= 0 && v < side) {
                    *slot = self.parent_index.get(&q.map(|v| v as u32)).copied();
                }
            }
            self.neighborhood = Some((parent, table));
        }
        let table = self.neighborhood.unwrap().1;
        let side = 1i64 << self.level;
        let mut cells = [EMPTY; WINDOW_CELLS];
        let base: [i64; 3] = key.cell.map(|c| c as i64 - ANCHOR as i64);
        let mut idx = 0;
        for x in 0..WINDOW as i64 {
            let cx = base[0] + x;
            for y in 0..WINDOW as i64 {
                let cy = base[1] + y;
                for z in 0..WINDOW as i64 {
                    let cz = base[2] + z;
                    if cx >= 0 && cy >= 0 && cz >= 0 && cx < side && cy < side && cz < side {
                        let off = |c: i64, p: u32| ((c >> 1) - p as i64 + 1) as usize;
                        let n =
                            off(cx, parent[0]) * 9 + off(cy, parent[1]) * 3 + off(cz, parent[2]);
                        if let Some(p) = table[n] {
                            let morton = (((cx & 1) << 2) | ((cy & 1) << 1) | (cz & 1)) as u8;
                            cells[idx] = self.state_at(p, morton);
                        }
                    }
                    idx += 1;
                }
            }
        }
        VoxelContext { cells }
    }
}

/// Window of same-level states around `key`: offsets `-1..=2` per axis,
/// current cell at local `(1, 1, 1)`. Cells outside the grid or under an
/// unoccupied parent are empty; cells under an occupied parent are
/// occupied/empty once coded and unknown before.
pub fn extract_voxel_context(key: &NodeKey, progress: &LevelProgress<'_>) -> VoxelContext {
    let mut cells = [EMPTY; WINDOW_CELLS];
    for x in 0..WINDOW {
        for y in 0..WINDOW {
            for z in 0..WINDOW {
                let cell = [
                    key.cell[0] as i64 + x as i64 - ANCHOR as i64,
                    key.cell[1] as i64 + y as i64 - ANCHOR as i64,
                    key.cell[2] as i64 + z as i64 - ANCHOR as i64,
                ];
                cells[VoxelContext::index(x, y, z)] = progress.state(cell);
            }
        }
    }
    VoxelContext { cells }
}

/// Occupied cell centers of an ancestor level, indexed for neighbor queries.
pub struct AncestorPoints {
    tree: KdTree,
    ancestor_level: u8,
    precision: u8,
}

impl AncestorPoints {
    /// Centers of the occupied cells of `ancestor` on the `precision`-bit grid.
    pub fn from_level(ancestor: &LevelOccupancy, precision: u8) -> Self {
        let centers = ancestor
            .cells()
            .iter()
            .map(|&c| cell_center(c, ancestor.level(), precision))
            .collect();
        Self::from_centers(centers, ancestor.level(), precision)
    }

    /// Arbitrary grid points standing in for the ancestor layer. Order is
    /// the tie-break order.
    pub fn from_centers(centers: Vec<[u32; 3]>, ancestor_level: u8, precision: u8) -> Self {
        let pts = centers
            .iter()
            .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
            .collect();
        AncestorPoints {
            tree: KdTree::new(pts),
            ancestor_level,
            precision,
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Side of an ancestor cell in grid units.
    pub fn cell_size(&self) -> f64 {
        (1u64 << (self.precision - self.ancestor_level)) as f64
    }
}

/// The `k` ancestor centers nearest to the center of `key`, relative to that
/// center and divided by the ancestor cell size. Short neighbor lists are
/// padded by repeating the nearest one.
pub fn extract_point_context(key: &NodeKey, ancestors: &AncestorPoints, k: usize) -> PointContext {
    assert!(k >= 1, "point context needs k >= 1");
    assert!(!ancestors.is_empty(), "ancestor layer is empty");
    let center = cell_center(key.cell, key.level, ancestors.precision).map(|c| c as f64);
    let idx = ancestors.tree.nearest(&center, k);
    let inv = 1.0 / ancestors.cell_size();
    let pts = ancestors.tree.points();
    let mut rows: Vec<[f32; 3]> = idx
        .iter()
        .map(|&i| {
            let p = pts[i];
            [
                ((p[0] - center[0]) * inv) as f32,
                ((p[1] - center[1]) * inv) as f32,
                ((p[2] - center[2]) * inv) as f32,
            ]
        })
        .collect();
    let valid = rows.len();
    rows.resize(k, rows[0]);
    PointContext::new(rows, valid)
}
