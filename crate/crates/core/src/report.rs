//! Rate comparison of the normal-guided predictor against the distance-only
//! baseline.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{decode_traced, encode_traced, CodecConfig};
use crate::error::{Error, Result};
use crate::lod::LodParams;
use crate::model::PointCloud;
use crate::predict::{IdwExponent, ThresholdPolicy};

/// Relative rate change in percent; negative means the enhanced coder
/// spends fewer bits.
pub fn delta_r(bpip_baseline: f64, bpip_enhanced: f64) -> f64 {
    (bpip_enhanced - bpip_baseline) / bpip_baseline * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub config: String,
    pub point_count: u64,
    pub bpip_baseline: f64,
    pub bpip_enhanced: f64,
    pub delta_r_percent: f64,
    /// Encode + decode wall clock of both configurations.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// A named enhanced configuration; its baseline is the same settings with
/// the normal branch off.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub label: String,
    pub enhanced: CodecConfig,
}

impl BenchConfig {
    pub fn new(enhanced: CodecConfig) -> Self {
        BenchConfig {
            label: config_label(&enhanced),
            enhanced,
        }
    }

    pub fn baseline(&self) -> CodecConfig {
        CodecConfig {
            normal_branch: false,
            ..self.enhanced
        }
    }
}

pub fn config_label(c: &CodecConfig) -> String {
    let threshold = match c.threshold {
        ThresholdPolicy::Fixed(v) => format!("T{v}"),
        ThresholdPolicy::Adaptive { shift } => format!("S{shift}"),
    };
    let idw = match c.idw {
        IdwExponent::Linear => 1,
        IdwExponent::Squared => 2,
    };
    format!("N{}-L{}-{threshold}-idw{idw}", c.normal_neighbors, c.lod.num_levels)
}

/// The default configuration, or with `sweep` the grid over normal
/// neighborhood {5, 15, 31}, threshold shift {6, 7, 8}, IDW exponent {1, 2}
/// and LOD levels {1, 3}.
pub fn bench_configs(sweep: bool) -> Vec<BenchConfig> {
    if !sweep {
        return vec![BenchConfig::new(CodecConfig::default())];
    }
    let mut out = Vec::new();
    for levels in [1u8, 3] {
        for n in [5u8, 15, 31] {
            for shift in [6u8, 7, 8] {
                for idw in [IdwExponent::Squared, IdwExponent::Linear] {
                    out.push(BenchConfig::new(CodecConfig {
                        normal_neighbors: n,
                        threshold: ThresholdPolicy::Adaptive { shift },
                        idw,
                        lod: LodParams {
                            num_levels: levels,
                            ..LodParams::default()
                        },
                        ..CodecConfig::default()
                    }));
                }
            }
        }
    }
    out
}

/// Encodes `cloud` with both configurations, checks that both decode
/// bit-exactly with matching decisions, and reports the rates.
pub fn run_pair(name: &str, cloud: &PointCloud, config: &BenchConfig) -> Result<BenchRow> {
    let start = Instant::now();
    let mut bpip = [0.0; 2];
    for (slot, cfg) in [config.baseline(), config.enhanced].iter().enumerate() {
        let (bs, stats, enc_trace) = encode_traced(cloud, cfg)?;
        let bytes = bs.to_bytes();
        let parsed = crate::codec::AttributeBitstream::from_bytes(&bytes)?;
        let (decoded, dec_trace) = decode_traced(&parsed, cloud.positions())?;
        if decoded.reflectances() != cloud.reflectances() {
            return Err(Error::Corrupt(format!(
                "{name} [{}]: round trip is not lossless",
                config_label(cfg)
            )));
        }
        if enc_trace != dec_trace {
            return Err(Error::Corrupt(format!(
                "{name} [{}]: decoder decisions diverge from the encoder",
                config_label(cfg)
            )));
        }
        bpip[slot] = stats.bpip;
    }
    Ok(BenchRow {
        name: name.to_string(),
        config: config.label.clone(),
        point_count: cloud.len() as u64,
        bpip_baseline: bpip[0],
        bpip_enhanced: bpip[1],
        delta_r_percent: delta_r(bpip[0], bpip[1]),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every configuration on every cloud. Clouds are processed in
/// parallel; rows come out in (cloud, config) order. Any failed round trip
/// aborts the run.
pub fn run_bench(clouds: &[(String, PointCloud)], configs: &[BenchConfig]) -> Result<BenchReport> {
    let per_cloud: Vec<Vec<BenchRow>> = clouds
        .par_iter()
        .map(|(name, cloud)| configs.iter().map(|c| run_pair(name, cloud, c)).collect())
        .collect::<Result<_>>()?;
    Ok(BenchReport {
        rows: per_cloud.into_iter().flatten().collect(),
    })
}

impl BenchReport {
    /// Per-configuration averages over all clouds, in first-seen order. The
    /// average ΔR is the mean of per-cloud ΔR values.
    pub fn averages(&self) -> Vec<BenchRow> {
        let mut labels: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !labels.contains(&r.config.as_str()) {
                labels.push(&r.config);
            }
        }
        labels
            .into_iter()
            .map(|label| {
                let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.config == label).collect();
                let n = rows.len() as f64;
                let mean = |f: fn(&BenchRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
                BenchRow {
                    name: "average".into(),
                    config: label.to_string(),
                    point_count: rows.iter().map(|r| r.point_count).sum(),
                    bpip_baseline: mean(|r| r.bpip_baseline),
                    bpip_enhanced: mean(|r| r.bpip_enhanced),
                    delta_r_percent: mean(|r| r.delta_r_percent),
                    seconds: rows.iter().map(|r| r.seconds).sum(),
                }
            })
            .collect()
    }

    pub fn mean_delta_r(&self) -> f64 {
        self.rows.iter().map(|r| r.delta_r_percent).sum::<f64>() / self.rows.len() as f64
    }

    fn all_rows(&self) -> impl Iterator<Item = BenchRow> + '_ {
        self.rows.iter().cloned().chain(self.averages())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "name,config,point_count,bpip_baseline,bpip_enhanced,delta_r_percent,seconds\n",
        );
        for r in self.all_rows() {
            writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.4},{:.3}",
                r.name, r.config, r.point_count, r.bpip_baseline, r.bpip_enhanced,
                r.delta_r_percent, r.seconds
            )
            .unwrap();
        }
        s
    }

    pub fn to_table(&self) -> String {
        let name_w = self.all_rows().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let cfg_w = self.all_rows().map(|r| r.config.len()).max().unwrap_or(6).max(6);
        let mut s = String::new();
        writeln!(
            s,
            "{:<name_w$}  {:<cfg_w$}  {:>9}  {:>9}  {:>9}  {:>8}  {:>8}",
            "name", "config", "points", "bpip base", "bpip enh", "dR %", "seconds"
        )
        .unwrap();
        let rule = "-".repeat(name_w + cfg_w + 4 + 9 * 3 + 8 * 2 + 10);
        writeln!(s, "{rule}").unwrap();
        let n = self.rows.len();
        for (i, r) in self.all_rows().enumerate() {
            if i == n {
                writeln!(s, "{rule}").unwrap();
            }
            writeln!(
                s,
                "{:<name_w$}  {:<cfg_w$}  {:>9}  {:>9.4}  {:>9.4}  {:>8.3}  {:>8.2}",
                r.name, r.config, r.point_count, r.bpip_baseline, r.bpip_enhanced,
                r.delta_r_percent, r.seconds
            )
            .unwrap();
        }
        s
    }
}
