//! Reference implementations the optimized code is checked against. Each one
//! is the obvious quadratic or iterative version of the same rule.
#![allow(dead_code)]

use lacn_core::entropy::{mode_bins, residual_bins, sign_unmap};
use lacn_core::lod::LodParams;
use lacn_core::predict::{predict, Mode, PredictorContext};
use lacn_core::spatial::{dist2, Neighbor};
use lacn_core::{PointCloud, Position};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_positions(rng: &mut ChaCha8Rng, n: usize, range: u32) -> Vec<Position> {
    (0..n)
        .map(|_| [0; 3].map(|_: u32| rng.gen_range(0..range)))
        .collect()
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, range: u32, attr_max: u32) -> PointCloud {
    let pos = random_positions(rng, n, range);
    let refl = (0..n).map(|_| rng.gen_range(0..=attr_max)).collect();
    PointCloud::new(pos, refl).unwrap()
}

/// k nearest among points with id `< bound`, by full scan.
pub fn knn_scan(points: &[Position], q: Position, k: usize, bound: u32) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| (*i as u32) < bound)
        .map(|(i, &p)| Neighbor {
            dist2: dist2(q, p),
            index: i as u32,
        })
        .collect();
    all.sort();
    all.truncate(k);
    all
}

/// Bit-by-bit interleave: bit `b` of axis `a` goes to bit `3b + a`.
pub fn interleave(p: Position) -> u64 {
    let mut code = 0u64;
    for b in 0..18 {
        for a in 0..3 {
            code |= (((p[a] >> b) & 1) as u64) << (3 * b + a);
        }
    }
    code
}

/// Stable sort of indices by the interleaved key.
pub fn interleave_sort(points: &[Position]) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..points.len() as u32).collect();
    idx.sort_by_key(|&i| interleave(points[i as usize]));
    idx
}

/// Level assignment straight from the rule: walking each level's candidates
/// in Morton order, a point joins the level if every point already at that
/// level or coarser is at least the level threshold away.
pub fn lod_quadratic(points: &[Position], params: &LodParams) -> (Vec<u8>, Vec<u32>) {
    let levels = params.num_levels as usize;
    let mut level_of = vec![(levels - 1) as u8; points.len()];
    let mut order: Vec<u32> = Vec::new();
    let mut remaining = interleave_sort(points);
    for level in 0..levels - 1 {
        let t = params.threshold(level);
        let mut rest = Vec::new();
        for &i in &remaining {
            let p = points[i as usize];
            if order.iter().all(|&j| dist2(p, points[j as usize]) >= t) {
                order.push(i);
                level_of[i as usize] = level as u8;
            } else {
                rest.push(i);
            }
        }
        remaining = rest;
    }
    order.extend(remaining);
    (level_of, order)
}

/// Cheapest signaled mode by enumerating every candidate; ties go to the
/// lower mode number.
pub fn rdo_exhaustive(ctx: &PredictorContext, actual: u32) -> Mode {
    let mut best: Option<(u32, Mode)> = None;
    for k in 1..=ctx.len() {
        let mode = Mode::from_index(k).unwrap();
        let pred = predict(ctx, mode, Default::default());
        let r = (actual as i64 - pred as i64) as i32;
        let cost = residual_bins(r) + mode_bins(k as u8).len() as u32;
        if best.map_or(true, |(c, _)| cost < c) {
            best = Some((cost, mode));
        }
    }
    best.unwrap().1
}

/// Eigenvalues and eigenvectors (columns) of a symmetric matrix by cyclic
/// Jacobi rotations.
pub fn jacobi_eigen(m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut r = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            r[p][p] = c;
            r[q][q] = c;
            r[p][q] = s;
            r[q][p] = -s;
            a = mul(transpose(r), mul(a, r));
            v = mul(v, r);
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

fn mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn transpose(a: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| a[j][i]))
}

/// `|M v - lambda v|` for the smallest Jacobi eigenvalue `lambda`.
pub fn eigen_residual(m: [[f64; 3]; 3], v: [f64; 3]) -> f64 {
    let (vals, _) = jacobi_eigen(m);
    let lambda = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let mv = [0, 1, 2].map(|i| (0..3).map(|k| m[i][k] * v[k]).sum::<f64>());
    (0..3)
        .map(|i| (mv[i] - lambda * v[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Draws `n` sign-mapped values from the geometric distribution with success
/// probability `p`, `P(u = k) = p (1 - p)^k`, and returns them as residuals.
pub fn geometric_residuals(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<i32> {
    (0..n)
        .map(|_| {
            let mut u = 0u32;
            while rng.gen::<f64>() >= p {
                u += 1;
            }
            sign_unmap(u)
        })
        .collect()
}

/// Zero-order entropy of the sample, in bits for the whole sequence.
pub fn empirical_entropy_bits(symbols: &[i32]) -> f64 {
    let mut counts = std::collections::HashMap::new();
    for &s in symbols {
        *counts.entry(s).or_insert(0u64) += 1;
    }
    let n = symbols.len() as f64;
    counts
        .values()
        .map(|&c| {
            let f = c as f64 / n;
            -(c as f64) * f.log2()
        })
        .sum()
}
