use crate::error::{Error, Result};
use crate::model::{Position, GEOMETRY_BITS, MAX_COORD};

/// 54-bit Z-order key: bit `3b + a` holds bit `b` of axis `a` (x=0, y=1, z=2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MortonCode(pub u64);

// Spreads the low 18 bits of `v` so that bit b lands on bit 3b.
#[inline]
fn spread(v: u32) -> u64 {
    let mut x = (v & MAX_COORD) as u64;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact(code: u64) -> u32 {
    let mut x = code & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x | (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x | (x >> 32)) & 0x3_ffff;
    x as u32
}

/// Interleaves without range checks. Callers must hold validated geometry.
#[inline]
pub(crate) fn morton_encode_unchecked(p: Position) -> u64 {
    spread(p[0]) | (spread(p[1]) << 1) | (spread(p[2]) << 2)
}

pub fn morton_encode(p: Position) -> Result<MortonCode> {
    if let Some(&c) = p.iter().find(|&&c| c > MAX_COORD) {
        return Err(Error::CoordinateOverflow {
            value: c as u64,
            bits: GEOMETRY_BITS,
        });
    }
    Ok(MortonCode(morton_encode_unchecked(p)))
}

pub fn morton_decode(code: MortonCode) -> Position {
    [compact(code.0), compact(code.0 >> 1), compact(code.0 >> 2)]
}

/// Point indices sorted by Morton code; duplicate positions keep their
/// original relative order.
pub fn morton_order(positions: &[Position]) -> Vec<u32> {
    let mut keyed: Vec<(u64, u32)> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| (morton_encode_unchecked(p), i as u32))
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}
