//! Committed reference streams. Each case has `<name>.ply` (geometry plus the
//! reference reflectances) and `<name>.bin` (the stream). Decoding must
//! reproduce the reflectances, and re-encoding must reproduce the stream
//! byte for byte.
//!
//! Regenerate with `LACN_BLESS=1 cargo test -p lacn-core --test golden` only
//! when a format change is intended.

mod common;

use std::path::PathBuf;

use lacn_core::model::{load_ply, load_ply_positions, save_ply, PlyDescriptor, PlyFormat};
use lacn_core::synth::SynthSceneSpec;
use lacn_core::{
    decode, encode, AttributeBitstream, CodecConfig, IdwExponent, LodParams, Orientation,
    PointCloud, ThresholdPolicy,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn scene(seed: u64, rings: u32, steps: u32) -> PointCloud {
    let mut s = SynthSceneSpec::urban(seed);
    s.sensor.rings = rings;
    s.sensor.azimuth_steps = steps;
    s.generate().unwrap()
}

fn cases() -> Vec<(&'static str, CodecConfig, Box<dyn Fn() -> PointCloud>)> {
    vec![
        ("urban-enhanced", CodecConfig::default(), Box::new(|| scene(101, 16, 256))),
        ("urban-baseline", CodecConfig::baseline(), Box::new(|| scene(101, 16, 256))),
        (
            "plane-lod3-idw1",
            CodecConfig {
                lod: LodParams {
                    num_levels: 3,
                    base_dist2: 40_000,
                    growth: 4,
                },
                idw: IdwExponent::Linear,
                ..CodecConfig::default()
            },
            Box::new(|| {
                let mut s = SynthSceneSpec::plane_only(102);
                s.sensor.rings = 16;
                s.sensor.azimuth_steps = 256;
                s.generate().unwrap()
            }),
        ),
        (
            "noise-fixed-threshold",
            CodecConfig {
                threshold: ThresholdPolicy::Fixed(500),
                orientation: Orientation::TowardBoundsCenter,
                normal_neighbors: 5,
                ..CodecConfig::default()
            },
            Box::new(|| {
                let mut s = SynthSceneSpec::noise(103);
                s.noise_points = 3000;
                s.generate().unwrap()
            }),
        ),
        (
            "random-8bit-duplicates",
            CodecConfig {
                normal_neighbors: 31,
                threshold: ThresholdPolicy::Adaptive { shift: 4 },
                ..CodecConfig::default()
            },
            Box::new(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(104);
                // a small range forces many duplicate positions
                common::random_cloud(&mut rng, 3000, 12, 255)
            }),
        ),
    ]
}

#[test]
fn golden_streams() {
    let bless = std::env::var_os("LACN_BLESS").is_some();
    for (name, cfg, build) in cases() {
        let ply = dir().join(format!("{name}.ply"));
        let bin = dir().join(format!("{name}.bin"));
        if bless {
            std::fs::create_dir_all(dir()).unwrap();
            let cloud = build();
            save_ply(&cloud, &ply, PlyFormat::BinaryLittleEndian).unwrap();
            let (bs, _) = encode(&cloud, &cfg).unwrap();
            std::fs::write(&bin, bs.to_bytes()).unwrap();
        }
        let reference = load_ply(&ply, &PlyDescriptor::default()).unwrap();
        let bytes = std::fs::read(&bin).unwrap();
        let bs = AttributeBitstream::from_bytes(&bytes).unwrap();
        assert_eq!(bs.header.config, cfg, "{name}: header");

        let positions = load_ply_positions(&ply, 1.0).unwrap();
        let decoded = decode(&bs, &positions).unwrap();
        assert_eq!(decoded.reflectances(), reference.reflectances(), "{name}: attributes");

        let (again, _) = encode(&reference, &cfg).unwrap();
        assert_eq!(again.to_bytes(), bytes, "{name}: stream bytes drifted");
    }
}
