//! Point clouds with a single reflectance attribute, and PLY I/O.

mod ply;

pub use ply::{
    load_ply, load_ply_positions, save_ply, PlyDescriptor, PlyFormat, ReflectanceKind,
};

use crate::error::{Error, Result};

/// Per-axis geometry precision, in bits.
pub const GEOMETRY_BITS: u32 = 18;

/// Largest representable coordinate value (exclusive bound is `1 << GEOMETRY_BITS`).
pub const MAX_COORD: u32 = (1 << GEOMETRY_BITS) - 1;

/// Largest supported attribute bit depth.
pub const MAX_ATTR_BITDEPTH: u8 = 31;

pub type Position = [u32; 3];

/// Smallest `b >= 1` such that `peak < 2^b`.
///
/// An all-zero attribute still needs one bit for the verbatim first value, so
/// a peak of zero maps to 1.
pub fn attr_bitdepth_for(peak: u32) -> u8 {
    (32 - peak.leading_zeros()).max(1) as u8
}

/// Voxelized positions plus one reflectance value per point.
///
/// Immutable once built; `PointCloud::new` enforces every invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointCloud {
    positions: Vec<Position>,
    reflectances: Vec<u32>,
    attr_bitdepth: u8,
}

impl PointCloud {
    pub fn new(positions: Vec<Position>, reflectances: Vec<u32>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidCloud("cloud has no points".into()));
        }
        if positions.len() != reflectances.len() {
            return Err(Error::InvalidCloud(format!(
                "{} positions but {} reflectances",
                positions.len(),
                reflectances.len()
            )));
        }
        check_positions(&positions)?;
        let peak = reflectances.iter().copied().max().unwrap_or(0);
        let attr_bitdepth = attr_bitdepth_for(peak);
        if attr_bitdepth > MAX_ATTR_BITDEPTH {
            return Err(Error::InvalidCloud(format!(
                "reflectance {peak} needs more than {MAX_ATTR_BITDEPTH} bits"
            )));
        }
        Ok(PointCloud {
            positions,
            reflectances,
            attr_bitdepth,
        })
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn reflectances(&self) -> &[u32] {
        &self.reflectances
    }

    pub fn attr_bitdepth(&self) -> u8 {
        self.attr_bitdepth
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Number of points whose position repeats an earlier point's.
    ///
    /// Duplicates are legal (LiDAR frames contain them) but worth reporting.
    pub fn duplicate_positions(&self) -> usize {
        let mut sorted = self.positions.clone();
        sorted.sort_unstable();
        sorted.windows(2).filter(|w| w[0] == w[1]).count()
    }

    pub fn into_parts(self) -> (Vec<Position>, Vec<u32>) {
        (self.positions, self.reflectances)
    }
}

/// Validates a geometry-only point set (used for decoder side information).
pub fn check_positions(positions: &[Position]) -> Result<()> {
    if let Some(&c) = positions.iter().flatten().find(|&&c| c > MAX_COORD) {
        return Err(Error::CoordinateOverflow {
            value: c as u64,
            bits: GEOMETRY_BITS,
        });
    }
    Ok(())
}
