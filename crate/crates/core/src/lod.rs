//! Level-of-detail partitioning and the resulting attribute coding order.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::Position;
use crate::spatial::dist2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LodParams {
    pub num_levels: u8,
    pub base_dist2: u32,
    /// Per-level multiplier of the squared-distance threshold.
    pub growth: u8,
}

impl Default for LodParams {
    fn default() -> Self {
        LodParams {
            num_levels: 1,
            base_dist2: 4096,
            growth: 4,
        }
    }
}

impl LodParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_levels == 0 {
            return Err(Error::InvalidParameter("LOD level count must be at least 1".into()));
        }
        if self.num_levels > 1 && (self.base_dist2 == 0 || self.growth == 0) {
            return Err(Error::InvalidParameter(
                "multi-level LOD needs base_dist2 >= 1 and growth >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Squared-distance threshold of sampled level `level` (0 = coarsest).
    pub fn threshold(&self, level: usize) -> u64 {
        let exp = (self.num_levels as usize - 1 - level) as u32;
        (self.growth as u64)
            .checked_pow(exp)
            .and_then(|g| g.checked_mul(self.base_dist2 as u64))
            .unwrap_or(u64::MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LodStructure {
    /// Level of each point, indexed by original point index.
    pub level_of: Vec<u8>,
    /// Point indices in coding order: level by level, Morton order within.
    pub coding_order: Vec<u32>,
    /// Start of each level in `coding_order`.
    pub level_offsets: Vec<usize>,
}

impl LodStructure {
    pub fn num_levels(&self) -> usize {
        self.level_offsets.len()
    }
}

/// Uniform hash grid with cell edge `ceil(sqrt(threshold))`: any point closer
/// than the threshold lies in one of the 27 surrounding cells.
struct Grid {
    cell: u64,
    cells: HashMap<[u32; 3], Vec<Position>>,
}

impl Grid {
    fn new(threshold: u64) -> Grid {
        let mut cell = (threshold as f64).sqrt() as u64;
        while cell.saturating_mul(cell) < threshold {
            cell += 1;
        }
        Grid {
            cell: cell.clamp(1, 1 << 20),
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: Position) -> [u32; 3] {
        p.map(|c| (c as u64 / self.cell) as u32)
    }

    fn insert(&mut self, p: Position) {
        self.cells.entry(self.key(p)).or_default().push(p);
    }

    fn any_closer_than(&self, p: Position, threshold: u64) -> bool {
        let k = self.key(p);
        let range = |c: u32| c.saturating_sub(1)..=c.saturating_add(1);
        for x in range(k[0]) {
            for y in range(k[1]) {
                for z in range(k[2]) {
                    if let Some(v) = self.cells.get(&[x, y, z]) {
                        if v.iter().any(|&q| dist2(p, q) < threshold) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Greedy distance subsampling from the coarsest level down. A candidate
/// (scanned in Morton order) joins a level when it is at least the level's
/// threshold away from every point already assigned to that level or a
/// coarser one. Leftovers form the finest level.
pub fn build_lod(positions: &[Position], morton: &[u32], params: &LodParams) -> Result<LodStructure> {
    params.validate()?;
    if morton.len() != positions.len() {
        return Err(Error::InvalidParameter("Morton order length differs from point count".into()));
    }
    let levels = params.num_levels as usize;
    let mut level_of = vec![u8::MAX; positions.len()];
    let mut coding_order = Vec::with_capacity(positions.len());
    let mut level_offsets = Vec::with_capacity(levels);
    let mut remaining: Vec<u32> = morton.to_vec();

    for level in 0..levels - 1 {
        level_offsets.push(coding_order.len());
        let threshold = params.threshold(level);
        let mut grid = Grid::new(threshold);
        for &i in &coding_order {
            grid.insert(positions[i as usize]);
        }
        let mut rest = Vec::with_capacity(remaining.len());
        for &i in &remaining {
            let p = positions[i as usize];
            if grid.any_closer_than(p, threshold) {
                rest.push(i);
            } else {
                grid.insert(p);
                level_of[i as usize] = level as u8;
                coding_order.push(i);
            }
        }
        remaining = rest;
    }
    level_offsets.push(coding_order.len());
    for &i in &remaining {
        level_of[i as usize] = (levels - 1) as u8;
    }
    coding_order.extend_from_slice(&remaining);
    Ok(LodStructure {
        level_of,
        coding_order,
        level_offsets,
    })
}
