//! Per-point surface normals from local PCA, computed from geometry alone so
//! that encoder and decoder derive bit-identical results.
//!
//! Normals are stored as Q1.30 fixed-point (`n / 2^30`). Floating point is
//! used only inside the 3x3 eigen solve; everything that feeds a coding
//! decision is an integer.

use rayon::prelude::*;

use crate::model::Position;
use crate::spatial::KdTree;

/// Q1.30 scale.
pub const NORMAL_ONE: i32 = 1 << 30;

pub const DEFAULT_NEIGHBORS: usize = 15;

/// Unit normal in Q1.30 plus a flag for neighborhoods too thin to define a
/// plane (rank < 2 scatter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Normal {
    pub v: [i32; 3],
    pub degenerate: bool,
}

impl Normal {
    pub const FALLBACK: Normal = Normal {
        v: [0, 0, NORMAL_ONE],
        degenerate: true,
    };

    pub fn new(v: [i32; 3]) -> Normal {
        Normal {
            v,
            degenerate: false,
        }
    }

    pub fn to_f64(self) -> [f64; 3] {
        self.v.map(|c| c as f64 / NORMAL_ONE as f64)
    }

    /// Exact fixed-point dot product, scaled by 2^60.
    pub fn dot(self, other: Normal) -> i128 {
        (0..3).map(|a| self.v[a] as i128 * other.v[a] as i128).sum()
    }
}

/// Where normals are flipped to face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Toward the coordinate origin.
    #[default]
    TowardOrigin,
    /// Toward the center of the geometry's bounding box.
    TowardBoundsCenter,
}

impl Orientation {
    /// Viewpoint in doubled coordinates, so a half-integer box center stays
    /// exact.
    fn viewpoint_x2(self, positions: &[Position]) -> [i64; 3] {
        match self {
            Orientation::TowardOrigin => [0; 3],
            Orientation::TowardBoundsCenter => {
                let mut lo = [u32::MAX; 3];
                let mut hi = [0u32; 3];
                for p in positions {
                    for a in 0..3 {
                        lo[a] = lo[a].min(p[a]);
                        hi[a] = hi[a].max(p[a]);
                    }
                }
                [0, 1, 2].map(|a| lo[a] as i64 + hi[a] as i64)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalField {
    normals: Vec<Normal>,
    neighbors: usize,
    orientation: Orientation,
}

impl NormalField {
    pub fn get(&self, i: usize) -> Normal {
        self.normals[i]
    }

    pub fn as_slice(&self) -> &[Normal] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Builds a field from explicit normals. Mostly useful for tests.
    pub fn from_normals(normals: Vec<Normal>) -> NormalField {
        NormalField {
            normals,
            neighbors: 0,
            orientation: Orientation::TowardOrigin,
        }
    }
}

/// `n^2` times the scatter matrix of `n` points about their centroid.
///
/// Exact integer arithmetic; symmetric positive semi-definite by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Covariance3 {
    pub xx: i128,
    pub xy: i128,
    pub xz: i128,
    pub yy: i128,
    pub yz: i128,
    pub zz: i128,
}

impl Covariance3 {
    /// Scatter of `points`; `anchor` is subtracted first to keep magnitudes
    /// small and does not affect the result.
    pub fn from_points(anchor: Position, points: impl IntoIterator<Item = Position>) -> Self {
        let (mut n, mut s, mut ss) = (0i128, [0i128; 3], [0i128; 6]);
        for p in points {
            let d = [0, 1, 2].map(|a| p[a] as i128 - anchor[a] as i128);
            n += 1;
            for a in 0..3 {
                s[a] += d[a];
            }
            ss[0] += d[0] * d[0];
            ss[1] += d[0] * d[1];
            ss[2] += d[0] * d[2];
            ss[3] += d[1] * d[1];
            ss[4] += d[1] * d[2];
            ss[5] += d[2] * d[2];
        }
        Covariance3 {
            xx: n * ss[0] - s[0] * s[0],
            xy: n * ss[1] - s[0] * s[1],
            xz: n * ss[2] - s[0] * s[2],
            yy: n * ss[3] - s[1] * s[1],
            yz: n * ss[4] - s[1] * s[2],
            zz: n * ss[5] - s[2] * s[2],
        }
    }

    pub fn diagonal(x: i128, y: i128, z: i128) -> Self {
        Covariance3 {
            xx: x,
            yy: y,
            zz: z,
            ..Default::default()
        }
    }

    pub fn trace(&self) -> i128 {
        self.xx + self.yy + self.zz
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let (xx, xy, xz) = (self.xx as f64, self.xy as f64, self.xz as f64);
        let (yy, yz, zz) = (self.yy as f64, self.yz as f64, self.zz as f64);
        [[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]]
    }

    /// Rank below 2, i.e. every 2x2 minor vanishes: the points are collinear
    /// or coincident, and no plane is defined.
    pub fn rank_below_two(&self) -> bool {
        let c = self;
        let minors = [
            c.xx * c.yy - c.xy * c.xy,
            c.xx * c.zz - c.xz * c.xz,
            c.yy * c.zz - c.yz * c.yz,
            c.xy * c.yz - c.xz * c.yy,
            c.xy * c.zz - c.xz * c.yz,
            c.xx * c.yz - c.xy * c.xz,
        ];
        minors.iter().all(|&m| m == 0)
    }
}

/// Relative eigenvalue gap below which two eigenvalues are treated as equal.
const EIGEN_TIE: f64 = 1e-12;

fn sub_cross(m: &[[f64; 3]; 3], lambda: f64) -> [f64; 3] {
    let r: Vec<[f64; 3]> = (0..3)
        .map(|i| {
            let mut row = m[i];
            row[i] -= lambda;
            row
        })
        .collect();
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let norm2 = |v: &[f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let candidates = [cross(r[0], r[1]), cross(r[0], r[2]), cross(r[1], r[2])];
    let best = candidates
        .iter()
        .copied()
        .max_by(|a, b| norm2(a).total_cmp(&norm2(b)))
        .unwrap();
    let n = norm2(&best).sqrt();
    best.map(|c| c / n)
}

/// Eigenvalues of a symmetric matrix in descending order, via the
/// trigonometric solution of the characteristic cubic.
pub fn symmetric_eigenvalues(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| b.total_cmp(a));
        return d;
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize, j: usize| (m[i][j] - if i == j { q } else { 0.0 }) / p;
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
        - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;
    [l1, l2, l3]
}

fn quantize(v: [f64; 3]) -> [i32; 3] {
    let mut q = v.map(|c| (c * NORMAL_ONE as f64).round() as i32);
    if let Some(&first) = q.iter().find(|&&c| c != 0) {
        if first < 0 {
            q = q.map(|c| -c);
        }
    }
    q
}

/// Unit eigenvector of the smallest eigenvalue, in Q1.30 with the first
/// nonzero component positive.
///
/// When the smallest eigenvalue is repeated the eigenspace is a plane (or all
/// of space); the result is then the first of z, y, x whose projection onto
/// that eigenspace is substantial.
pub fn eig_smallest(cov: &Covariance3) -> [i32; 3] {
    let z = [0, 0, NORMAL_ONE];
    let tr = cov.trace();
    if tr <= 0 {
        return z;
    }
    let scale = tr as f64;
    let m = cov.to_matrix().map(|row| row.map(|c| c / scale));
    let [l1, l2, l3] = symmetric_eigenvalues(&m);
    if l1 - l3 <= EIGEN_TIE {
        return z;
    }
    if l2 - l3 <= EIGEN_TIE {
        let u = sub_cross(&m, l1);
        for axis in [2usize, 1, 0] {
            let mut v = [0.0; 3];
            v[axis] = 1.0;
            let d = u[axis];
            let proj = [v[0] - d * u[0], v[1] - d * u[1], v[2] - d * u[2]];
            let n2: f64 = proj.iter().map(|c| c * c).sum();
            if n2 >= 1.0 / 3.0 {
                let n = n2.sqrt();
                return quantize(proj.map(|c| c / n));
            }
        }
        unreachable!("projections of the three axes sum to 2");
    }
    quantize(sub_cross(&m, l3))
}

/// True iff the angle between the two normals exceeds 90 degrees, i.e. their
/// dot product is negative. A right angle is not "greater than 90".
///
/// Degenerate normals carry no direction, so any pair involving one reports
/// false.
pub fn normal_angle_exceeds_90(a: Normal, b: Normal) -> bool {
    if a.degenerate || b.degenerate {
        return false;
    }
    a.dot(b) < 0
}

fn orient(v: [i32; 3], p: Position, view_x2: [i64; 3]) -> [i32; 3] {
    let d: i128 = (0..3)
        .map(|a| v[a] as i128 * (view_x2[a] - 2 * p[a] as i64) as i128)
        .sum();
    if d < 0 {
        v.map(|c| -c)
    } else {
        v
    }
}

/// Estimates one normal per point from its `neighbors` nearest points (the
/// point itself included).
pub fn estimate_normals(
    positions: &[Position],
    neighbors: usize,
    orientation: Orientation,
) -> NormalField {
    let k = neighbors.max(1).min(positions.len());
    let normals = if positions.is_empty() {
        Vec::new()
    } else {
        let tree = KdTree::from_positions(positions).expect("non-empty");
        let view = orientation.viewpoint_x2(positions);
        positions
            .par_iter()
            .map(|&p| {
                let nbrs = tree.knn(p, k);
                let cov =
                    Covariance3::from_points(p, nbrs.iter().map(|n| positions[n.index as usize]));
                if cov.rank_below_two() {
                    Normal::FALLBACK
                } else {
                    Normal::new(orient(eig_smallest(&cov), p, view))
                }
            })
            .collect()
    };
    NormalField {
        normals,
        neighbors,
        orientation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const Q: f64 = NORMAL_ONE as f64;

    fn norm2_value(v: [i32; 3]) -> f64 {
        v.iter().map(|&c| (c as f64 / Q).powi(2)).sum()
    }

    #[test]
    fn diagonal_smallest_axis() {
        assert_eq!(eig_smallest(&Covariance3::diagonal(2, 1, 0)), [0, 0, NORMAL_ONE]);
        assert_eq!(eig_smallest(&Covariance3::diagonal(0, 5, 9)), [NORMAL_ONE, 0, 0]);
        assert_eq!(eig_smallest(&Covariance3::diagonal(5, 0, 9)), [0, NORMAL_ONE, 0]);
    }

    #[test]
    fn isotropic_prefers_z_then_y() {
        assert_eq!(eig_smallest(&Covariance3::diagonal(1, 1, 1)), [0, 0, NORMAL_ONE]);
        // smallest eigenspace = span(y, z)
        assert_eq!(eig_smallest(&Covariance3::diagonal(2, 1, 1)), [0, 0, NORMAL_ONE]);
        // smallest eigenspace = span(x, y): z is orthogonal to it, so y wins
        assert_eq!(eig_smallest(&Covariance3::diagonal(1, 1, 3)), [0, NORMAL_ONE, 0]);
        assert_eq!(eig_smallest(&Covariance3::default()), [0, 0, NORMAL_ONE]);
    }

    #[test]
    fn canonical_sign() {
        // plane x - y = const has normal (1, -1, 0)/sqrt2 up to sign
        let pts: Vec<Position> = (0..5)
            .flat_map(|i| (0..4).map(move |z| [10 + i, 20 + i, z]))
            .collect();
        let v = eig_smallest(&Covariance3::from_points(pts[0], pts.iter().copied()));
        assert!(v[0] > 0 && v[1] < 0 && v[2] == 0);
        assert!((norm2_value(v) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn plane_z0_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Position> = Vec::new();
        while pts.len() < 20 {
            let p = [rng.gen_range(0..100), rng.gen_range(0..100), 0];
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        let field = estimate_normals(&pts, 15, Orientation::TowardOrigin);
        for n in field.as_slice() {
            assert!(!n.degenerate);
            // dot with -p is exactly 0, canonical sign keeps +z
            assert_eq!(n.v, [0, 0, NORMAL_ONE]);
        }
    }

    #[test]
    fn collinear_is_degenerate() {
        let pts: Vec<Position> = (0..15).map(|i| [3 * i, 2 * i + 1, i]).collect();
        let field = estimate_normals(&pts, 15, Orientation::TowardOrigin);
        assert!(field.as_slice().iter().all(|n| *n == Normal::FALLBACK));
        let dup = vec![[4, 4, 4]; 6];
        let field = estimate_normals(&dup, 15, Orientation::TowardOrigin);
        assert!(field.as_slice().iter().all(|n| *n == Normal::FALLBACK));
    }

    #[test]
    fn orientation_faces_viewpoint() {
        // plane z = 100 seen from the origin: normal must point to -z
        let pts: Vec<Position> = (0..6)
            .flat_map(|i| (0..6).map(move |j| [i * 3, j * 5, 100]))
            .collect();
        let field = estimate_normals(&pts, 15, Orientation::TowardOrigin);
        for n in field.as_slice() {
            assert_eq!(n.v, [0, 0, -NORMAL_ONE]);
        }
        // same plane with a point far below it: box center is below the plane
        let mut pts2 = pts.clone();
        pts2.push([0, 0, 0]);
        let field = estimate_normals(&pts2, 15, Orientation::TowardBoundsCenter);
        assert_eq!(field.get(10).v, [0, 0, -NORMAL_ONE]);
    }

    #[test]
    fn sphere_patch_normals_within_5_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = 20_000.0f64;
        let c = [100_000.0f64, 100_000.0, 100_000.0];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        while pts.len() < 50 {
            // patch around the +z pole, half-angle ~0.1 rad
            let th = rng.gen_range(0.0..0.1f64);
            let ph = rng.gen_range(0.0..std::f64::consts::TAU);
            let n = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            let p = [0, 1, 2].map(|a| (c[a] + r * n[a]).round() as u32);
            if pts.contains(&p) {
                continue;
            }
            pts.push(p);
            truth.push(n);
        }
        let field = estimate_normals(&pts, 15, Orientation::TowardOrigin);
        for (n, t) in field.as_slice().iter().zip(&truth) {
            let v = n.to_f64();
            let cos = (v[0] * t[0] + v[1] * t[1] + v[2] * t[2]).abs();
            assert!(cos.acos().to_degrees() < 5.0, "{v:?} vs {t:?}");
        }
    }

    /// Smallest eigenpair by power iteration on `trace*I - C`; independent of
    /// the closed-form path.
    fn power_smallest(m: &[[f64; 3]; 3]) -> (f64, [f64; 3]) {
        let shift = m[0][0] + m[1][1] + m[2][2];
        let mut v = [0.3f64, 0.5, 0.8];
        for _ in 0..20_000 {
            let mut w = [0.0; 3];
            for i in 0..3 {
                w[i] = shift * v[i] - (0..3).map(|j| m[i][j] * v[j]).sum::<f64>();
            }
            let n = w.iter().map(|c| c * c).sum::<f64>().sqrt();
            v = w.map(|c| c / n);
        }
        let mv: Vec<f64> = (0..3).map(|i| (0..3).map(|j| m[i][j] * v[j]).sum()).collect();
        let lambda = (0..3).map(|i| v[i] * mv[i]).sum();
        (lambda, v)
    }

    #[test]
    fn random_psd_residual_against_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let pts: Vec<Position> = (0..15)
                .map(|_| [rng.gen_range(0..1000), rng.gen_range(0..1000), rng.gen_range(0..300)])
                .collect();
            let cov = Covariance3::from_points(pts[0], pts.iter().copied());
            let m = cov.to_matrix();
            let tr = m[0][0] + m[1][1] + m[2][2];
            let (lambda, _) = power_smallest(&m);
            let v = eig_smallest(&cov).map(|c| c as f64 / Q);
            let res: f64 = (0..3)
                .map(|i| ((0..3).map(|j| m[i][j] * v[j]).sum::<f64>() - lambda * v[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-6 * tr, "residual {res} trace {tr}");
        }
    }

    #[test]
    fn unit_norm_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Position> = (0..500)
            .map(|_| [rng.gen_range(0..5000), rng.gen_range(0..5000), rng.gen_range(0..5000)])
            .collect();
        let field = estimate_normals(&pts, 15, Orientation::TowardOrigin);
        for (n, p) in field.as_slice().iter().zip(&pts) {
            assert!((norm2_value(n.v) - 1.0).abs() <= 2f64.powi(-20));
            let d: i128 = (0..3).map(|a| n.v[a] as i128 * -(p[a] as i128)).sum();
            assert!(d >= 0);
        }
        assert_eq!(field, estimate_normals(&pts, 15, Orientation::TowardOrigin));
    }

    #[test]
    fn angle_examples() {
        let x = Normal::new([NORMAL_ONE, 0, 0]);
        let nx = Normal::new([-NORMAL_ONE, 0, 0]);
        let y = Normal::new([0, NORMAL_ONE, 0]);
        assert!(!normal_angle_exceeds_90(x, x));
        assert!(normal_angle_exceeds_90(x, nx));
        assert!(!normal_angle_exceeds_90(x, y));
        assert!(!normal_angle_exceeds_90(Normal::FALLBACK, nx));
        let down = Normal::new([0, 0, -NORMAL_ONE]);
        assert!(!normal_angle_exceeds_90(Normal::FALLBACK, down));
    }

    #[test]
    fn angle_sign_test_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let a = [0; 3].map(|_| rng.gen_range(-1.0..1.0f64));
            let b = [0; 3].map(|_| rng.gen_range(-1.0..1.0f64));
            let s = rng.gen_range(0.01..100.0f64);
            let q = |v: [f64; 3]| {
                let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                Normal::new(v.map(|c| (c / n * Q).round() as i32))
            };
            let r1 = normal_angle_exceeds_90(q(a), q(b));
            let r2 = normal_angle_exceeds_90(q(a.map(|c| c * s)), q(b));
            let dot: f64 = (0..3).map(|i| a[i] * b[i]).sum();
            let na = a.iter().map(|c| c * c).sum::<f64>().sqrt();
            let nb = b.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (dot / na / nb).abs() > 1e-6 {
                assert_eq!(r1, r2);
            }
        }
    }
}
