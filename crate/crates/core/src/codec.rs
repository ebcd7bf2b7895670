//! Attribute encode/decode pipelines and the bitstream container.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "LACN"
//!      4     1  version
//!      5     1  flags (bit0 normal branch, bit1 box-center orientation,
//!                      bit2 linear IDW weights)
//!      6     1  attribute bit depth
//!      7     1  normal neighborhood size N
//!      8     1  LOD level count
//!      9     4  LOD base squared distance (LE)
//!     13     1  LOD growth factor
//!     14     1  threshold policy (0 fixed, 1 adaptive)
//!     15     2  threshold value or shift (LE)
//!     17     8  point count (LE)
//!     25     -  payload: first attribute (ceil(depth/8) bytes, LE), then the
//!               range-coded stream when there is more than one point
//! ```

use serde::Serialize;

use crate::entropy::{SymbolDecoder, SymbolEncoder};
use crate::error::{Error, Result};
use crate::lod::{build_lod, LodParams};
use crate::model::{check_positions, PointCloud, Position, MAX_ATTR_BITDEPTH};
use crate::normal::{estimate_normals, NormalField, Orientation, DEFAULT_NEIGHBORS};
use crate::predict::{
    decide, predict, residual, select, IdwExponent, Mode, NeighborSearch, NormalPair,
    Predecessors, PredictorContext, Selection, ThresholdPolicy,
};
use crate::spatial::morton_order;

pub const MAGIC: [u8; 4] = *b"LACN";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 25;

const FLAG_NORMAL_BRANCH: u8 = 1 << 0;
const FLAG_BOX_CENTER: u8 = 1 << 1;
const FLAG_IDW_LINEAR: u8 = 1 << 2;
const KNOWN_FLAGS: u8 = FLAG_NORMAL_BRANCH | FLAG_BOX_CENTER | FLAG_IDW_LINEAR;

/// Encoder settings. Everything here is written to the header, so the
/// decoder needs nothing but the stream and the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    pub normal_branch: bool,
    pub normal_neighbors: u8,
    pub orientation: Orientation,
    pub lod: LodParams,
    pub threshold: ThresholdPolicy,
    pub idw: IdwExponent,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            normal_branch: true,
            normal_neighbors: DEFAULT_NEIGHBORS as u8,
            orientation: Orientation::TowardOrigin,
            lod: LodParams::default(),
            threshold: ThresholdPolicy::default(),
            idw: IdwExponent::Squared,
        }
    }
}

impl CodecConfig {
    /// The distance-only anchor: same pipeline with the normal branch off.
    pub fn baseline() -> Self {
        CodecConfig {
            normal_branch: false,
            ..CodecConfig::default()
        }
    }

    pub fn validate(&self, attr_bitdepth: u8) -> Result<()> {
        if self.normal_neighbors < 3 {
            return Err(Error::InvalidParameter(format!(
                "normal neighborhood of {} points; at least 3 needed",
                self.normal_neighbors
            )));
        }
        self.lod.validate()?;
        self.threshold.threshold(attr_bitdepth)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u8,
    pub attr_bitdepth: u8,
    pub point_count: u64,
    pub config: CodecConfig,
}

impl Header {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let c = &self.config;
        let mut flags = 0;
        if c.normal_branch {
            flags |= FLAG_NORMAL_BRANCH;
        }
        if c.orientation == Orientation::TowardBoundsCenter {
            flags |= FLAG_BOX_CENTER;
        }
        if c.idw == IdwExponent::Linear {
            flags |= FLAG_IDW_LINEAR;
        }
        let (policy, value) = match c.threshold {
            ThresholdPolicy::Fixed(v) => (0u8, v),
            ThresholdPolicy::Adaptive { shift } => (1u8, shift as u16),
        };
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4] = self.version;
        b[5] = flags;
        b[6] = self.attr_bitdepth;
        b[7] = c.normal_neighbors;
        b[8] = c.lod.num_levels;
        b[9..13].copy_from_slice(&c.lod.base_dist2.to_le_bytes());
        b[13] = c.lod.growth;
        b[14] = policy;
        b[15..17].copy_from_slice(&value.to_le_bytes());
        b[17..25].copy_from_slice(&self.point_count.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Header> {
        if b.len() < HEADER_LEN {
            return Err(Error::Corrupt("stream shorter than the header".into()));
        }
        if b[0..4] != MAGIC {
            return Err(Error::Corrupt("bad magic".into()));
        }
        if b[4] != VERSION {
            return Err(Error::Corrupt(format!("unsupported version {}", b[4])));
        }
        let flags = b[5];
        if flags & !KNOWN_FLAGS != 0 {
            return Err(Error::Corrupt(format!("unknown flags {flags:#04x}")));
        }
        let attr_bitdepth = b[6];
        if attr_bitdepth == 0 || attr_bitdepth > MAX_ATTR_BITDEPTH {
            return Err(Error::Corrupt(format!("attribute bit depth {attr_bitdepth}")));
        }
        let value = u16::from_le_bytes([b[15], b[16]]);
        let threshold = match b[14] {
            0 => ThresholdPolicy::Fixed(value),
            1 => ThresholdPolicy::Adaptive {
                shift: u8::try_from(value)
                    .map_err(|_| Error::Corrupt(format!("threshold shift {value}")))?,
            },
            p => return Err(Error::Corrupt(format!("threshold policy {p}"))),
        };
        let config = CodecConfig {
            normal_branch: flags & FLAG_NORMAL_BRANCH != 0,
            normal_neighbors: b[7],
            orientation: if flags & FLAG_BOX_CENTER != 0 {
                Orientation::TowardBoundsCenter
            } else {
                Orientation::TowardOrigin
            },
            lod: LodParams {
                num_levels: b[8],
                base_dist2: u32::from_le_bytes(b[9..13].try_into().unwrap()),
                growth: b[13],
            },
            threshold,
            idw: if flags & FLAG_IDW_LINEAR != 0 {
                IdwExponent::Linear
            } else {
                IdwExponent::Squared
            },
        };
        config
            .validate(attr_bitdepth)
            .map_err(|e| Error::Corrupt(format!("header: {e}")))?;
        Ok(Header {
            version: b[4],
            attr_bitdepth,
            point_count: u64::from_le_bytes(b[17..25].try_into().unwrap()),
            config,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeBitstream {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl AttributeBitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = Header::from_bytes(bytes)?;
        Ok(AttributeBitstream {
            header,
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }

    pub fn len_bytes(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CodecStats {
    pub points: u64,
    pub header_bits: u64,
    pub total_bits: u64,
    /// Bits per input point, header included.
    pub bpip: f64,
    /// Points coded with each mode, indexed by mode number.
    pub mode_counts: [u64; 4],
    pub signaled: u64,
    /// Unsignaled decisions that fell back to the weighted average.
    pub implicit_idw: u64,
    /// Unsignaled decisions that copied the nearest neighbor.
    pub implicit_neighbor1: u64,
}

/// Per-point decisions in coding order; entry 0 (the verbatim first point)
/// is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub decisions: Vec<Option<(Mode, bool)>>,
}

/// Geometry-derived state shared by encoder and decoder.
struct Analysis {
    coding_order: Vec<u32>,
    predecessors: Vec<Predecessors>,
    normals: Option<NormalField>,
}

impl Analysis {
    fn new(positions: &[Position], config: &CodecConfig) -> Result<Analysis> {
        let morton = morton_order(positions);
        let normals = config.normal_branch.then(|| {
            estimate_normals(positions, config.normal_neighbors as usize, config.orientation)
        });
        let lod = build_lod(positions, &morton, &config.lod)?;
        let predecessors = NeighborSearch::new(positions, &lod.coding_order)?.all();
        Ok(Analysis {
            coding_order: lod.coding_order,
            predecessors,
            normals,
        })
    }

    fn normal_pair(&self, i: usize, ctx: &PredictorContext) -> NormalPair {
        self.normals.as_ref().map(|field| {
            let current = self.coding_order[i] as usize;
            let nearest = self.coding_order[ctx.indices()[0] as usize] as usize;
            (field.get(current), field.get(nearest))
        })
    }
}

fn first_attr_bytes(attr_bitdepth: u8) -> usize {
    (attr_bitdepth as usize).div_ceil(8)
}

pub fn encode(cloud: &PointCloud, config: &CodecConfig) -> Result<(AttributeBitstream, CodecStats)> {
    encode_traced(cloud, config).map(|(bs, stats, _)| (bs, stats))
}

pub fn encode_traced(
    cloud: &PointCloud,
    config: &CodecConfig,
) -> Result<(AttributeBitstream, CodecStats, Trace)> {
    let attr_bitdepth = cloud.attr_bitdepth();
    config.validate(attr_bitdepth)?;
    let threshold = config.threshold.threshold(attr_bitdepth)?;
    let header = Header {
        version: VERSION,
        attr_bitdepth,
        point_count: cloud.len() as u64,
        config: *config,
    };
    let analysis = Analysis::new(cloud.positions(), config)?;
    let n = cloud.len();
    let actual: Vec<u32> = analysis
        .coding_order
        .iter()
        .map(|&i| cloud.reflectances()[i as usize])
        .collect();

    let mut payload = actual[0].to_le_bytes()[..first_attr_bytes(attr_bitdepth)].to_vec();
    let mut stats = CodecStats {
        points: n as u64,
        ..CodecStats::default()
    };
    let mut trace = Trace {
        decisions: Vec::with_capacity(n),
    };
    trace.decisions.push(None);
    if n > 1 {
        let mut enc = SymbolEncoder::new();
        let mut recon = vec![0u32; n];
        recon[0] = actual[0];
        for i in 1..n {
            let ctx = PredictorContext::new(analysis.predecessors[i].as_slice(), |j| {
                recon[j as usize]
            })?;
            let d = decide(&ctx, actual[i], threshold, analysis.normal_pair(i, &ctx), config.idw);
            if d.signaled {
                enc.encode_mode(d.mode as u8);
                stats.signaled += 1;
            } else if d.mode == Mode::Idw {
                stats.implicit_idw += 1;
            } else {
                stats.implicit_neighbor1 += 1;
            }
            stats.mode_counts[d.mode.index()] += 1;
            enc.encode_residual(d.residual);
            recon[i] = (d.predicted as i64 + d.residual as i64) as u32;
            trace.decisions.push(Some((d.mode, d.signaled)));
        }
        payload.extend_from_slice(&enc.finish());
    }
    let bs = AttributeBitstream { header, payload };
    stats.header_bits = (HEADER_LEN * 8) as u64;
    stats.total_bits = bs.len_bytes() as u64 * 8;
    stats.bpip = stats.total_bits as f64 / n as f64;
    Ok((bs, stats, trace))
}

/// Reconstructs reflectances for `positions`, which must be the geometry the
/// stream was encoded with, in the same point order.
pub fn decode(bs: &AttributeBitstream, positions: &[Position]) -> Result<PointCloud> {
    decode_traced(bs, positions).map(|(c, _)| c)
}

pub fn decode_traced(bs: &AttributeBitstream, positions: &[Position]) -> Result<(PointCloud, Trace)> {
    let h = &bs.header;
    if h.point_count != positions.len() as u64 {
        return Err(Error::CountMismatch {
            expected: h.point_count,
            actual: positions.len() as u64,
        });
    }
    if positions.is_empty() {
        return Err(Error::InvalidCloud("cloud has no points".into()));
    }
    check_positions(positions)?;
    let config = h.config;
    let threshold = config.threshold.threshold(h.attr_bitdepth)?;
    let n = positions.len();

    let nfirst = first_attr_bytes(h.attr_bitdepth);
    if bs.payload.len() < nfirst {
        return Err(Error::Underrun);
    }
    let mut first = [0u8; 4];
    first[..nfirst].copy_from_slice(&bs.payload[..nfirst]);
    let first = u32::from_le_bytes(first);
    if first >> h.attr_bitdepth != 0 {
        return Err(Error::Corrupt("first attribute exceeds the bit depth".into()));
    }

    let analysis = Analysis::new(positions, &config)?;
    let mut recon = vec![0u32; n];
    recon[0] = first;
    let mut trace = Trace {
        decisions: Vec::with_capacity(n),
    };
    trace.decisions.push(None);
    let rest = &bs.payload[nfirst..];
    if n > 1 {
        let mut dec = SymbolDecoder::new(rest)?;
        let limit = 1i64 << h.attr_bitdepth;
        for i in 1..n {
            let ctx = PredictorContext::new(analysis.predecessors[i].as_slice(), |j| {
                recon[j as usize]
            })?;
            let (mode, signaled) = match select(&ctx, threshold, analysis.normal_pair(i, &ctx)) {
                Selection::Signaled => {
                    let m = dec.decode_mode()?;
                    if m as usize > ctx.len() {
                        return Err(Error::Corrupt(format!(
                            "mode {m} with only {} neighbors",
                            ctx.len()
                        )));
                    }
                    (Mode::from_index(m as usize).unwrap(), true)
                }
                Selection::Implicit(m) => (m, false),
            };
            let value = predict(&ctx, mode, config.idw) as i64 + dec.decode_residual()? as i64;
            if !(0..limit).contains(&value) {
                return Err(Error::Corrupt(format!("reconstructed attribute {value} out of range")));
            }
            recon[i] = value as u32;
            debug_assert_eq!(residual(recon[i], predict(&ctx, mode, config.idw)) as i64,
                value - predict(&ctx, mode, config.idw) as i64);
            trace.decisions.push(Some((mode, signaled)));
        }
        dec.finish()?;
    } else if !rest.is_empty() {
        return Err(Error::Corrupt("trailing bytes after a single-point payload".into()));
    }

    let mut reflectances = vec![0u32; n];
    for (i, &orig) in analysis.coding_order.iter().enumerate() {
        reflectances[orig as usize] = recon[i];
    }
    Ok((PointCloud::new(positions.to_vec(), reflectances)?, trace))
}
