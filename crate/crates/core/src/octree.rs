//! Octree levels over the `N`-bit cube and their breadth-first symbol stream.
//!
//! Levels are stored as sorted sets of occupied cells rather than as a
//! pointer tree. Level `d` holds the distinct top-`d`-bit prefixes of all
//! points; level 0 is the root cell.
//!
//! Coding order: levels ascend; within a level, parents are visited in
//! lexicographic `(i, j, k)` order; within a parent the eight children are
//! visited in Morton order `(x << 2) | (y << 1) | z`.

use crate::pcio::{GridFrame, PointCloud};
use crate::{Error, Result};

/// Integer cell coordinates `(i, j, k)` at some level.
pub type Cell = [u32; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeKey {
    pub level: u8,
    pub cell: Cell,
}

impl NodeKey {
    pub const ROOT: NodeKey = NodeKey {
        level: 0,
        cell: [0, 0, 0],
    };

    pub fn new(level: u8, cell: Cell) -> Self {
        NodeKey { level, cell }
    }

    /// Parent key; the root is its own parent.
    pub fn parent(&self) -> NodeKey {
        if self.level == 0 {
            return *self;
        }
        NodeKey {
            level: self.level - 1,
            cell: self.cell.map(|c| c >> 1),
        }
    }

    /// Morton index of this cell within its parent.
    pub fn child_index(&self) -> u8 {
        child_index(self.cell)
    }

    pub fn child(&self, index: u8) -> NodeKey {
        NodeKey {
            level: self.level + 1,
            cell: child_cell(self.cell, index),
        }
    }
}

/// Morton index `(x << 2) | (y << 1) | z` of the low bits of a cell.
#[inline]
pub fn child_index(cell: Cell) -> u8 {
    (((cell[0] & 1) << 2) | ((cell[1] & 1) << 1) | (cell[2] & 1)) as u8
}

#[inline]
pub fn child_cell(parent: Cell, index: u8) -> Cell {
    let i = index as u32;
    [
        (parent[0] << 1) | ((i >> 2) & 1),
        (parent[1] << 1) | ((i >> 1) & 1),
        (parent[2] << 1) | (i & 1),
    ]
}

/// Cell center on the `precision`-bit grid:
/// `cell * 2^(N-d) + floor(2^(N-d) / 2)`.
#[inline]
pub fn cell_center(cell: Cell, level: u8, precision: u8) -> [u32; 3] {
    let shift = precision - level;
    let half = (1u32 << shift) >> 1;
    cell.map(|c| (c << shift) + half)
}

/// Occupied cells of one level, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelOccupancy {
    level: u8,
    cells: Vec<Cell>,
}

impl LevelOccupancy {
    pub fn root() -> Self {
        LevelOccupancy {
            level: 0,
            cells: vec![[0, 0, 0]],
        }
    }

    /// Sorts and deduplicates `cells`.
    pub fn new(level: u8, mut cells: Vec<Cell>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        LevelOccupancy { level, cells }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: &Cell) -> bool {
        self.cells.binary_search(cell).is_ok()
    }

    pub fn index_of(&self, cell: &Cell) -> Option<usize> {
        self.cells.binary_search(cell).ok()
    }

    /// Candidate children of this level in coding order.
    pub fn children(&self) -> impl Iterator<Item = NodeKey> + '_ {
        self.cells.iter().flat_map(move |&c| {
            let parent = NodeKey::new(self.level, c);
            (0..8).map(move |i| parent.child(i))
        })
    }
}

fn check_depth(depth: u8, precision: u8) -> Result<()> {
    if depth == 0 || depth > precision {
        return Err(Error::InvalidInput(format!(
            "depth must be in 1..={precision}, got {depth}"
        )));
    }
    Ok(())
}

/// Occupancy of levels `0..=depth`.
pub fn build_levels(pc: &PointCloud, depth: u8) -> Result<Vec<LevelOccupancy>> {
    let precision = pc.precision();
    check_depth(depth, precision)?;
    if pc.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build an octree of an empty cloud".into(),
        ));
    }
    let mut levels = Vec::with_capacity(depth as usize + 1);
    levels.push(LevelOccupancy::root());
    for d in 1..=depth {
        let shift = precision - d;
        let cells = pc.points().iter().map(|p| p.map(|c| c >> shift)).collect();
        levels.push(LevelOccupancy::new(d, cells));
    }
    Ok(levels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Symbol {
    pub key: NodeKey,
    pub bit: bool,
}

/// Breadth-first binary occupancy symbols.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolStream {
    pub symbols: Vec<Symbol>,
}

impl SymbolStream {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.symbols.iter().map(|s| s.bit)
    }
}

/// Emits eight symbols per occupied cell of levels `0..D-1`.
pub fn serialize(levels: &[LevelOccupancy]) -> SymbolStream {
    let total: usize = levels.iter().rev().skip(1).map(|l| l.len() * 8).sum();
    let mut symbols = Vec::with_capacity(total);
    for pair in levels.windows(2) {
        let (parents, children) = (&pair[0], &pair[1]);
        for key in parents.children() {
            symbols.push(Symbol {
                key,
                bit: children.contains(&key.cell),
            });
        }
    }
    SymbolStream { symbols }
}

/// Rebuilds levels `0..=depth` from a symbol stream, validating its structure.
pub fn deserialize(stream: &SymbolStream, depth: u8) -> Result<Vec<LevelOccupancy>> {
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    let mut levels = vec![LevelOccupancy::root()];
    let mut symbols = stream.symbols.iter();
    for d in 1..=depth {
        let parents = levels.last().unwrap();
        let mut cells = Vec::new();
        for (n, expected) in parents.children().enumerate() {
            let sym = symbols
                .next()
                .ok_or_else(|| Error::Corrupt(format!("symbol stream truncated at level {d}")))?;
            if sym.key != expected {
                return Err(Error::Corrupt(format!(
                    "symbol for {:?} at level {} does not follow an occupied parent (expected {:?})",
                    sym.key.cell, sym.key.level, expected.cell
                )));
            }
            if sym.bit {
                cells.push(sym.key.cell);
            }
            if n % 8 == 7
                && !cells
                    .last()
                    .is_some_and(|c| c.map(|v| v >> 1) == expected.parent().cell)
            {
                return Err(Error::Corrupt(format!(
                    "occupied cell {:?} at level {} has no occupied child",
                    expected.parent().cell,
                    d - 1
                )));
            }
        }
        levels.push(LevelOccupancy::new(d, cells));
    }
    if symbols.next().is_some() {
        return Err(Error::Corrupt(
            "trailing symbols after the last level".into(),
        ));
    }
    Ok(levels)
}

/// One point per occupied level-`depth` cell, at the cell center on the
/// frame's `N`-bit grid.
pub fn reconstruct_points(
    levels: &[LevelOccupancy],
    depth: u8,
    frame: GridFrame,
) -> Result<PointCloud> {
    check_depth(depth, frame.precision)?;
    let level = levels.get(depth as usize).ok_or_else(|| {
        Error::InvalidInput(format!(
            "octree has {} levels, need {depth}",
            levels.len().saturating_sub(1)
        ))
    })?;
    let points = level
        .cells()
        .iter()
        .map(|&c| cell_center(c, depth, frame.precision))
        .collect();
    PointCloud::new(points, frame)
}
