//! Z-order sorting and exact nearest-neighbor search on integer geometry.

mod kdtree;
mod morton;

pub use kdtree::{dist2, KdTree, Neighbor};
pub use morton::{morton_decode, morton_encode, morton_order, MortonCode};
