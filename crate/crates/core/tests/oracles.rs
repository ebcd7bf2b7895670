mod common;

use common::*;
use lacn_core::entropy::{SymbolDecoder, SymbolEncoder};
use lacn_core::lod::{build_lod, LodParams};
use lacn_core::normal::{eig_smallest, normal_angle_exceeds_90, Covariance3, NORMAL_ONE};
use lacn_core::predict::{rdo_select, PredictorContext};
use lacn_core::spatial::{morton_order, KdTree, Neighbor};
use lacn_core::Normal;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn knn_matches_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = rng.gen_range(500..800);
        let range = [4, 64, 1 << 18][trial % 3];
        let pts = random_positions(&mut rng, n, range);
        let tree = KdTree::from_positions(&pts).unwrap();
        for _ in 0..5 {
            let q = pts[rng.gen_range(0..n)];
            let k = rng.gen_range(1..=31);
            assert_eq!(tree.knn(q, k), knn_scan(&pts, q, k, u32::MAX));
            let bound = rng.gen_range(1..=n as u32);
            assert_eq!(tree.knn_below(q, 3, bound), knn_scan(&pts, q, 3, bound));
        }
    }
}

#[test]
fn morton_matches_interleave_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for range in [2, 16, 1000, 1 << 18] {
        let pts = random_positions(&mut rng, 5000, range);
        assert_eq!(morton_order(&pts), interleave_sort(&pts));
    }
}

#[test]
fn lod_matches_quadratic_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (levels, base, growth) in [(3u8, 64u32, 4u8), (2, 1000, 2), (4, 9, 3)] {
        let pts = random_positions(&mut rng, 1000, 256);
        let params = LodParams {
            num_levels: levels,
            base_dist2: base,
            growth,
        };
        let lod = build_lod(&pts, &morton_order(&pts), &params).unwrap();
        let (level_of, order) = lod_quadratic(&pts, &params);
        assert_eq!(lod.level_of, level_of);
        assert_eq!(lod.coding_order, order);
    }
}

#[test]
fn eigenvector_matches_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..2000 {
        let n = rng.gen_range(3..40);
        let spread = [3u32, 50, 5000][trial % 3];
        // flatten one random axis now and then to get near-planar sets
        let flat = rng.gen_range(0..4usize);
        let pts: Vec<_> = (0..n)
            .map(|_| {
                let mut p = [0; 3].map(|_: u32| rng.gen_range(0..spread));
                if flat < 3 {
                    p[flat] = rng.gen_range(0..2);
                }
                p
            })
            .collect();
        let cov = Covariance3::from_points(pts[0], pts.iter().copied());
        if cov.rank_below_two() {
            continue;
        }
        let m = cov.to_matrix();
        let trace = m[0][0] + m[1][1] + m[2][2];
        let v = eig_smallest(&cov).map(|c| c as f64 / NORMAL_ONE as f64);
        let r = eigen_residual(m, v);
        assert!(r <= 1e-6 * trace, "trial {trial}: residual {r} trace {trace}");
    }
}

#[test]
fn rdo_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100_000 {
        let len = rng.gen_range(1..=3);
        let span = [4u32, 100, 1 << 15][rng.gen_range(0..3)];
        let nbrs: Vec<Neighbor> = (0..len)
            .map(|j| Neighbor {
                dist2: j as u64 + 1,
                index: j as u32,
            })
            .collect();
        let attrs: Vec<u32> = (0..len).map(|_| rng.gen_range(0..span)).collect();
        let ctx = PredictorContext::new(&nbrs, |j| attrs[j as usize]).unwrap();
        let actual = rng.gen_range(0..span);
        assert_eq!(rdo_select(&ctx, actual), rdo_exhaustive(&ctx, actual));
    }
}

#[test]
fn residual_fuzz_million() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let rs: Vec<i32> = (0..1_000_000)
        .map(|_| match rng.gen_range(0..3) {
            0 => rng.gen_range(-4..=4),
            1 => rng.gen_range(-5000..=5000),
            _ => rng.gen_range(-i32::MAX..=i32::MAX),
        })
        .collect();
    let mut enc = SymbolEncoder::new();
    for &r in &rs {
        enc.encode_residual(r);
    }
    let bytes = enc.finish();
    let mut dec = SymbolDecoder::new(&bytes).unwrap();
    for &r in &rs {
        assert_eq!(dec.decode_residual().unwrap(), r);
    }
    dec.finish().unwrap();
}

#[test]
fn geometric_streams_near_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for p in [0.5, 0.9, 0.99] {
        let rs = geometric_residuals(&mut rng, 200_000, p);
        let mut enc = SymbolEncoder::new();
        for &r in &rs {
            enc.encode_residual(r);
        }
        let bits = enc.finish().len() as f64 * 8.0;
        let h = empirical_entropy_bits(&rs);
        eprintln!("p={p}: {bits} bits, entropy {h:.0}, ratio {:.4}", bits / h);
        assert!(bits <= 1.10 * h, "p={p}: {bits} bits vs entropy {h}");
    }
}

fn unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [0; 3].map(|_: u8| rng.gen_range(-1.0..1.0f64));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

fn to_normal(v: [f64; 3]) -> Normal {
    Normal::new(v.map(|c| (c * NORMAL_ONE as f64).round() as i32))
}

#[test]
fn angle_test_agrees_with_arccos() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut checked = 0;
    for _ in 0..100_000 {
        let (a, b) = (to_normal(unit(&mut rng)), to_normal(unit(&mut rng)));
        let (fa, fb) = (a.to_f64(), b.to_f64());
        let dot: f64 = (0..3).map(|i| fa[i] * fb[i]).sum();
        let norms = (fa.iter().map(|c| c * c).sum::<f64>() * fb.iter().map(|c| c * c).sum::<f64>()).sqrt();
        let cos = dot / norms;
        if cos.abs() > 1e-9 {
            let theta = cos.clamp(-1.0, 1.0).acos().to_degrees();
            assert_eq!(normal_angle_exceeds_90(a, b), theta > 90.0);
            checked += 1;
        }
    }
    assert!(checked > 99_000);
    let x = Normal::new([NORMAL_ONE, 0, 0]);
    let y = Normal::new([0, NORMAL_ONE, 0]);
    assert!(!normal_angle_exceeds_90(x, y));
    assert!(!normal_angle_exceeds_90(y, x));
}

proptest! {
    #[test]
    fn knn_below_any_bound(seed in any::<u64>(), n in 1usize..300, k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_positions(&mut rng, n, 32);
        let tree = KdTree::from_positions(&pts).unwrap();
        let q = random_positions(&mut rng, 1, 32)[0];
        let bound = rng.gen_range(0..=n as u32);
        prop_assert_eq!(tree.knn_below(q, k, bound), knn_scan(&pts, q, k, bound));
    }

    #[test]
    fn right_angle_is_never_greater(a in -1000i32..1000, b in -1000i32..1000) {
        // (a, b, 0) and (-b, a, 0) are exactly orthogonal
        let u = Normal::new([a << 20, b << 20, 0]);
        let v = Normal::new([(-b) << 20, a << 20, 0]);
        prop_assert!(!normal_angle_exceeds_90(u, v));
    }
}
