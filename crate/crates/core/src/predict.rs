//! The predicting transform: nearest-neighbor contexts, predictor modes and
//! the rules that pick between them.
//!
//! Every function here is shared verbatim by encoder and decoder. The only
//! encoder-only step is [`rdo_select`], whose result is signaled.

use rayon::prelude::*;

use crate::entropy::{mode_bins, residual_bins};
use crate::error::{Error, Result};
use crate::model::Position;
use crate::normal::{normal_angle_exceeds_90, Normal};
use crate::spatial::{KdTree, Neighbor};

/// Number of predictor neighbors.
pub const PREDICTOR_NEIGHBORS: usize = 3;

/// Inverse-distance weight numerator.
const IDW_ONE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Inverse-distance weighted average of all neighbors.
    Idw = 0,
    Neighbor1 = 1,
    Neighbor2 = 2,
    Neighbor3 = 3,
}

impl Mode {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Mode> {
        [Mode::Idw, Mode::Neighbor1, Mode::Neighbor2, Mode::Neighbor3]
            .get(i)
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdwExponent {
    /// Weights `1/d`.
    Linear,
    /// Weights `1/d^2`.
    Squared,
}

impl Default for IdwExponent {
    fn default() -> Self {
        IdwExponent::Squared
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdPolicy {
    Fixed(u16),
    /// `2^(attr_bitdepth - shift)`, at least 1.
    Adaptive { shift: u8 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Adaptive { shift: 7 }
    }
}

impl ThresholdPolicy {
    pub fn threshold(&self, attr_bitdepth: u8) -> Result<u32> {
        match *self {
            ThresholdPolicy::Fixed(0) => {
                Err(Error::InvalidParameter("fixed max_diff threshold must be positive".into()))
            }
            ThresholdPolicy::Fixed(v) => Ok(v as u32),
            ThresholdPolicy::Adaptive { shift } => Ok(1 << attr_bitdepth.saturating_sub(shift)),
        }
    }
}

/// Up to three already-coded neighbors of the current point, nearest first.
/// Indices are coding-order positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictorContext {
    len: usize,
    index: [u32; PREDICTOR_NEIGHBORS],
    dist2: [u64; PREDICTOR_NEIGHBORS],
    attr: [u32; PREDICTOR_NEIGHBORS],
}

impl PredictorContext {
    /// `neighbors` must be sorted by `(dist2, index)` and hold 1..=3 entries.
    pub fn new(neighbors: &[Neighbor], attrs: impl Fn(u32) -> u32) -> Result<Self> {
        if neighbors.is_empty() || neighbors.len() > PREDICTOR_NEIGHBORS {
            return Err(Error::InvalidParameter(format!(
                "predictor context needs 1..=3 neighbors, got {}",
                neighbors.len()
            )));
        }
        let mut ctx = PredictorContext {
            len: neighbors.len(),
            index: [0; 3],
            dist2: [0; 3],
            attr: [0; 3],
        };
        for (j, n) in neighbors.iter().enumerate() {
            ctx.index[j] = n.index;
            ctx.dist2[j] = n.dist2;
            ctx.attr[j] = attrs(n.index);
        }
        Ok(ctx)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn indices(&self) -> &[u32] {
        &self.index[..self.len]
    }

    pub fn dist2s(&self) -> &[u64] {
        &self.dist2[..self.len]
    }

    pub fn attrs(&self) -> &[u32] {
        &self.attr[..self.len]
    }
}

/// Fixed-capacity neighbor list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Predecessors {
    len: u8,
    items: [Neighbor; PREDICTOR_NEIGHBORS],
}

impl Predecessors {
    pub fn as_slice(&self) -> &[Neighbor] {
        &self.items[..self.len as usize]
    }
}

/// Exact 3-NN among earlier points of the coding order.
#[derive(Debug, Clone)]
pub struct NeighborSearch {
    tree: KdTree,
    coded: Vec<Position>,
}

impl NeighborSearch {
    /// `coding_order[i]` is the original index of the point coded `i`-th.
    pub fn new(positions: &[Position], coding_order: &[u32]) -> Result<Self> {
        let coded: Vec<Position> = coding_order.iter().map(|&i| positions[i as usize]).collect();
        let tree = KdTree::from_positions(&coded)?;
        Ok(NeighborSearch { tree, coded })
    }

    /// Nearest predecessors of coding position `i` (`i >= 1`).
    pub fn predecessors(&self, i: usize) -> Result<Vec<Neighbor>> {
        if i == 0 {
            return Err(Error::InvalidParameter(
                "the first coded point has no predictor".into(),
            ));
        }
        Ok(self.tree.knn_below(self.coded[i], PREDICTOR_NEIGHBORS, i as u32))
    }

    /// Predecessors of every coding position; entry 0 is empty.
    pub fn all(&self) -> Vec<Predecessors> {
        (0..self.coded.len())
            .into_par_iter()
            .map(|i| {
                let mut p = Predecessors::default();
                if i > 0 {
                    let found = self.tree.knn_below(self.coded[i], PREDICTOR_NEIGHBORS, i as u32);
                    p.len = found.len() as u8;
                    p.items[..found.len()].copy_from_slice(&found);
                }
                p
            })
            .collect()
    }
}

/// Context of coding position `i` with attributes read from the
/// reconstruction buffer (indexed by coding position).
pub fn gather_neighbors(
    search: &NeighborSearch,
    i: usize,
    recon: &[u32],
) -> Result<PredictorContext> {
    let nbrs = search.predecessors(i)?;
    PredictorContext::new(&nbrs, |j| recon[j as usize])
}

/// Largest pairwise absolute attribute difference among the neighbors.
pub fn max_diff(ctx: &PredictorContext) -> u32 {
    let a = ctx.attrs();
    let (lo, hi) = a
        .iter()
        .fold((u32::MAX, 0), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn isqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Fixed-point inverse-distance weighted average, rounded half-up. A
/// neighbor at distance zero wins outright.
pub fn predict_idw(ctx: &PredictorContext, exponent: IdwExponent) -> u32 {
    if ctx.dist2[0] == 0 {
        return ctx.attr[0];
    }
    let (mut num, mut den) = (0u128, 0u128);
    for (&d2, &a) in ctx.dist2s().iter().zip(ctx.attrs()) {
        let d = match exponent {
            IdwExponent::Squared => d2,
            IdwExponent::Linear => isqrt(d2),
        };
        let w = (IDW_ONE / d.max(1)) as u128;
        num += w * a as u128;
        den += w;
    }
    ((num + den / 2) / den) as u32
}

pub fn predict(ctx: &PredictorContext, mode: Mode, exponent: IdwExponent) -> u32 {
    match mode {
        Mode::Idw => predict_idw(ctx, exponent),
        m => ctx.attr[m.index() - 1],
    }
}

pub fn residual(actual: u32, predicted: u32) -> i32 {
    (actual as i64 - predicted as i64) as i32
}

/// Rate proxy of a signaled mode: residual bins plus mode bins.
pub fn rdo_cost(ctx: &PredictorContext, actual: u32, mode: Mode) -> u32 {
    let pred = ctx.attr[mode.index() - 1];
    residual_bins(residual(actual, pred)) + mode_bins(mode as u8).len() as u32
}

/// Cheapest direct-copy mode among the available neighbors; ties go to the
/// nearer neighbor. Lossless coding makes distortion zero for every mode, so
/// the cost is rate alone.
pub fn rdo_select(ctx: &PredictorContext, actual: u32) -> Mode {
    (1..=ctx.len())
        .map(|k| Mode::from_index(k).unwrap())
        .min_by_key(|&m| (rdo_cost(ctx, actual, m), m))
        .unwrap()
}

/// How the predictor for one point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Neighbor attributes disagree; the encoder picks and signals a mode.
    Signaled,
    /// Derived identically on both sides; nothing is written.
    Implicit(Mode),
}

/// Normals of the current point and of its nearest coded neighbor, when the
/// normal-guided branch is active.
pub type NormalPair = Option<(Normal, Normal)>;

pub fn select(ctx: &PredictorContext, threshold: u32, normals: NormalPair) -> Selection {
    if max_diff(ctx) > threshold {
        return Selection::Signaled;
    }
    match normals {
        None => Selection::Implicit(Mode::Idw),
        Some((current, nearest)) => {
            if normal_angle_exceeds_90(current, nearest) {
                Selection::Implicit(Mode::Idw)
            } else {
                Selection::Implicit(Mode::Neighbor1)
            }
        }
    }
}

/// Outcome for one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictorDecision {
    pub mode: Mode,
    pub signaled: bool,
    pub predicted: u32,
    pub residual: i32,
}

/// Encoder-side decision for a point whose true attribute is `actual`.
pub fn decide(
    ctx: &PredictorContext,
    actual: u32,
    threshold: u32,
    normals: NormalPair,
    exponent: IdwExponent,
) -> PredictorDecision {
    let (mode, signaled) = match select(ctx, threshold, normals) {
        Selection::Signaled => (rdo_select(ctx, actual), true),
        Selection::Implicit(m) => (m, false),
    };
    let predicted = predict(ctx, mode, exponent);
    PredictorDecision {
        mode,
        signaled,
        predicted,
        residual: residual(actual, predicted),
    }
}
