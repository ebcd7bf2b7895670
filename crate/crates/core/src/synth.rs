//! Deterministic LiDAR-like test scenes.
//!
//! A spinning multi-ring sensor stands above the center of the coordinate grid and
//! casts one ray per (ring, azimuth step) into a scene of a ground plane and
//! axis-aligned boxes. Reflectance follows a per-surface base value, a
//! per-ring gain, distance falloff, incidence and bounded integer noise.
//! The `noise` kind keeps the reflectance model but scatters points
//! uniformly, so local geometry carries no surface information.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PointCloud, Position, GEOMETRY_BITS, MAX_COORD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    #[default]
    Scan,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sensor {
    pub rings: u32,
    pub azimuth_steps: u32,
    /// Elevation of the lowest and highest ring, degrees.
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    /// Sensor height above the ground, meters.
    pub height_m: f64,
    pub max_range_m: f64,
    /// Half-width of the uniform-sum (triangular) range noise, meters.
    pub range_noise_m: f64,
}

impl Default for Sensor {
    fn default() -> Self {
        Sensor {
            rings: 64,
            azimuth_steps: 2048,
            elevation_min_deg: -24.8,
            elevation_max_deg: 2.0,
            height_m: 1.8,
            max_range_m: 120.0,
            range_noise_m: 0.02,
        }
    }
}

/// Axis-aligned box standing on the ground. Coordinates are meters
/// relative to the sensor's ground footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxObstacle {
    pub center: [f64; 2],
    pub size: [f64; 3],
    /// Base reflectance as a fraction of full scale.
    pub reflectance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Reflectance {
    pub bitdepth: u8,
    pub ground: f64,
    /// Painted stripes on the ground, every `lane_spacing_m` along x.
    pub lane_marking: Option<f64>,
    pub lane_spacing_m: f64,
    pub lane_width_m: f64,
    /// Relative spread of the per-ring calibration gain.
    pub ring_gain_spread: f64,
    /// Distance at which the signal has dropped to half, meters.
    pub falloff_half_m: f64,
    /// Weight of the Lambertian incidence term, 0..=1.
    pub incidence_weight: f64,
    /// Relative amplitude of piecewise-constant surface texture.
    pub texture: f64,
    /// Edge length of the cubic texture cells, meters.
    pub texture_cell_m: f64,
    /// Uniform integer noise in `[-noise, noise]`.
    pub noise: u32,
}

impl Default for Reflectance {
    fn default() -> Self {
        Reflectance {
            bitdepth: 15,
            ground: 0.25,
            lane_marking: Some(0.7),
            lane_spacing_m: 3.5,
            lane_width_m: 0.15,
            ring_gain_spread: 0.03,
            falloff_half_m: 40.0,
            incidence_weight: 0.3,
            texture: 0.15,
            texture_cell_m: 0.2,
            noise: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSceneSpec {
    pub seed: u64,
    pub kind: SceneKind,
    /// Meters per grid unit.
    pub resolution_m: f64,
    pub sensor: Sensor,
    pub boxes: Vec<BoxObstacle>,
    /// Random boxes added on top of `boxes`.
    pub random_boxes: u32,
    /// Enclosing walls at this half-extent, if any.
    pub walls_half_extent_m: Option<f64>,
    pub wall_height_m: f64,
    pub wall_reflectance: f64,
    /// Point count of the `noise` kind.
    pub noise_points: u32,
    pub reflectance: Reflectance,
}

impl Default for SynthSceneSpec {
    fn default() -> Self {
        SynthSceneSpec {
            seed: 1,
            kind: SceneKind::Scan,
            resolution_m: 0.001,
            sensor: Sensor::default(),
            boxes: Vec::new(),
            random_boxes: 24,
            walls_half_extent_m: Some(60.0),
            wall_height_m: 20.0,
            wall_reflectance: 0.45,
            noise_points: 131_072,
            reflectance: Reflectance::default(),
        }
    }
}

impl SynthSceneSpec {
    /// Street-like scene: enclosing walls plus random boxes.
    pub fn urban(seed: u64) -> Self {
        SynthSceneSpec {
            seed,
            ..Self::default()
        }
    }

    /// Ground plane only; every ring points downward so all rays hit it.
    ///
    /// Range noise is kept at 2 mm: noise along the ray moves points within
    /// the scan cone of their ring, and at centimeter level the near-range
    /// neighborhoods (one ring wide) fit that cone better than the ground.
    pub fn plane_only(seed: u64) -> Self {
        SynthSceneSpec {
            seed,
            random_boxes: 0,
            walls_half_extent_m: None,
            sensor: Sensor {
                elevation_max_deg: -2.0,
                range_noise_m: 0.002,
                ..Sensor::default()
            },
            ..Self::default()
        }
    }

    /// Same reflectance model over uniformly scattered points.
    pub fn noise(seed: u64) -> Self {
        SynthSceneSpec {
            seed,
            kind: SceneKind::Noise,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let s = &self.sensor;
        let bad = |m: &str| Err(Error::InvalidParameter(format!("synth spec: {m}")));
        if !(self.resolution_m > 0.0) {
            return bad("resolution_m must be positive");
        }
        if s.rings == 0 || s.azimuth_steps == 0 {
            return bad("rings and azimuth_steps must be positive");
        }
        if !(s.elevation_min_deg <= s.elevation_max_deg)
            || s.elevation_min_deg <= -90.0
            || s.elevation_max_deg >= 90.0
        {
            return bad("elevations must be ordered and within (-90, 90)");
        }
        if !(s.height_m > 0.0 && s.max_range_m > 0.0 && s.range_noise_m >= 0.0) {
            return bad("sensor height, range and noise must be positive");
        }
        let half = (1u64 << (GEOMETRY_BITS - 1)) as f64 * self.resolution_m;
        if s.max_range_m + s.range_noise_m >= half {
            return bad("max_range_m does not fit the coordinate grid at this resolution");
        }
        let r = &self.reflectance;
        if !(r.texture_cell_m > 0.0) {
            return bad("texture_cell_m must be positive");
        }
        if r.bitdepth == 0 || r.bitdepth > 15 {
            return bad("reflectance bitdepth must be 1..=15");
        }
        if self.kind == SceneKind::Noise && self.noise_points == 0 {
            return bad("noise_points must be positive");
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<PointCloud> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let gains: Vec<f64> = (0..self.sensor.rings)
            .map(|_| 1.0 + self.reflectance.ring_gain_spread * rng.gen_range(-1.0..=1.0))
            .collect();
        let hits = match self.kind {
            SceneKind::Scan => self.scan(&mut rng),
            SceneKind::Noise => self.scatter(&mut rng),
        };
        let full = ((1u32 << self.reflectance.bitdepth) - 1) as f64;
        let center = (1u32 << (GEOMETRY_BITS - 1)) as f64;
        let mut positions = Vec::with_capacity(hits.len());
        let mut refl = Vec::with_capacity(hits.len());
        for h in hits {
            let p: [f64; 3] = [0, 1, 2].map(|a| (h.point[a] / self.resolution_m + center).round());
            if p.iter().any(|&c| c < 0.0 || c > MAX_COORD as f64) {
                continue;
            }
            let r = &self.reflectance;
            let falloff = 1.0 / (1.0 + h.range / r.falloff_half_m);
            let lambert = 1.0 - r.incidence_weight + r.incidence_weight * h.cos_incidence;
            let texture = 1.0 + r.texture * texture_noise(self.seed, h.point, r.texture_cell_m);
            let v = full * h.base * gains[h.ring as usize] * falloff * lambert * texture;
            let noise = rng.gen_range(-(r.noise as i64)..=r.noise as i64);
            let v = (v.round() as i64 + noise).clamp(0, full as i64);
            positions.push(p.map(|c| c as u32) as Position);
            refl.push(v as u32);
        }
        if positions.is_empty() {
            return Err(Error::InvalidParameter("synth spec produced no points".into()));
        }
        PointCloud::new(positions, refl)
    }

    fn obstacles(&self, rng: &mut ChaCha8Rng) -> Vec<BoxObstacle> {
        let mut boxes = self.boxes.clone();
        let reach = self.walls_half_extent_m.unwrap_or(self.sensor.max_range_m * 0.7) - 4.0;
        for _ in 0..self.random_boxes {
            // keep a clear zone around the sensor
            let center = loop {
                let c = [rng.gen_range(-reach..reach), rng.gen_range(-reach..reach)];
                if c[0].hypot(c[1]) > 6.0 {
                    break c;
                }
            };
            boxes.push(BoxObstacle {
                center,
                size: [
                    rng.gen_range(1.0..8.0),
                    rng.gen_range(1.0..8.0),
                    rng.gen_range(1.0..6.0),
                ],
                reflectance: rng.gen_range(0.1..0.9),
            });
        }
        if let Some(e) = self.walls_half_extent_m {
            let t = 1.0;
            let h = self.wall_height_m;
            let r = self.wall_reflectance;
            for (c, s) in [
                ([e + t / 2.0, 0.0], [t, 2.0 * e + 2.0 * t, h]),
                ([-e - t / 2.0, 0.0], [t, 2.0 * e + 2.0 * t, h]),
                ([0.0, e + t / 2.0], [2.0 * e, t, h]),
                ([0.0, -e - t / 2.0], [2.0 * e, t, h]),
            ] {
                boxes.push(BoxObstacle {
                    center: c,
                    size: s,
                    reflectance: r,
                });
            }
        }
        boxes
    }

    fn scan(&self, rng: &mut ChaCha8Rng) -> Vec<Hit> {
        let s = &self.sensor;
        let boxes = self.obstacles(rng);
        let origin = [0.0, 0.0, s.height_m];
        let mut hits = Vec::with_capacity((s.rings * s.azimuth_steps) as usize);
        for step in 0..s.azimuth_steps {
            let az = std::f64::consts::TAU * step as f64 / s.azimuth_steps as f64;
            for ring in 0..s.rings {
                let el = if s.rings == 1 {
                    s.elevation_min_deg
                } else {
                    s.elevation_min_deg
                        + (s.elevation_max_deg - s.elevation_min_deg) * ring as f64
                            / (s.rings - 1) as f64
                }
                .to_radians();
                let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
                let Some((t, normal, base)) = self.cast(origin, dir, &boxes) else {
                    continue;
                };
                let noise = s.range_noise_m * (rng.gen::<f64>() - rng.gen::<f64>());
                let range = t + noise;
                if range <= 0.0 || range > s.max_range_m {
                    continue;
                }
                let point = [0, 1, 2].map(|a| origin[a] + dir[a] * range);
                hits.push(Hit {
                    point,
                    range,
                    cos_incidence: -(0..3).map(|a| dir[a] * normal[a]).sum::<f64>(),
                    base,
                    ring,
                });
            }
        }
        hits
    }

    /// Nearest intersection: (distance, outward surface normal, base value).
    fn cast(&self, o: [f64; 3], d: [f64; 3], boxes: &[BoxObstacle]) -> Option<(f64, [f64; 3], f64)> {
        let mut best: Option<(f64, [f64; 3], f64)> = None;
        if d[2] < 0.0 {
            let t = -o[2] / d[2];
            let x = o[0] + d[0] * t;
            let r = &self.reflectance;
            let base = match r.lane_marking {
                Some(v) if (x.rem_euclid(r.lane_spacing_m)) < r.lane_width_m => v,
                _ => r.ground,
            };
            best = Some((t, [0.0, 0.0, 1.0], base));
        }
        for b in boxes {
            let lo = [b.center[0] - b.size[0] / 2.0, b.center[1] - b.size[1] / 2.0, 0.0];
            let hi = [b.center[0] + b.size[0] / 2.0, b.center[1] + b.size[1] / 2.0, b.size[2]];
            let (mut tmin, mut tmax, mut axis) = (0.0f64, f64::INFINITY, usize::MAX);
            let mut sign = 0.0;
            let mut miss = false;
            for a in 0..3 {
                if d[a].abs() < 1e-12 {
                    if o[a] < lo[a] || o[a] > hi[a] {
                        miss = true;
                        break;
                    }
                    continue;
                }
                let (t0, t1) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
                let (near, far) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                if near > tmin {
                    tmin = near;
                    axis = a;
                    sign = if d[a] > 0.0 { -1.0 } else { 1.0 };
                }
                tmax = tmax.min(far);
            }
            // the sensor is never inside a box, so a hit needs an entry face
            if miss || tmin > tmax || axis == usize::MAX {
                continue;
            }
            if best.map_or(true, |(t, _, _)| tmin < t) {
                let mut n = [0.0; 3];
                n[axis] = sign;
                best = Some((tmin, n, b.reflectance));
            }
        }
        best
    }

    fn scatter(&self, rng: &mut ChaCha8Rng) -> Vec<Hit> {
        let s = &self.sensor;
        let half = s.max_range_m / 3f64.sqrt();
        let (el_lo, el_hi) = (s.elevation_min_deg.to_radians(), s.elevation_max_deg.to_radians());
        (0..self.noise_points)
            .map(|_| {
                let point = [0, 1, 2].map(|_| rng.gen_range(-half..half));
                let range = (point[0] * point[0] + point[1] * point[1] + point[2] * point[2])
                    .sqrt()
                    .max(1e-9);
                // same per-ring gains, indexed by the elevation the point would
                // be seen at
                let el = (point[2] / range).asin().clamp(el_lo, el_hi);
                let ring = if el_hi > el_lo {
                    ((el - el_lo) / (el_hi - el_lo) * (s.rings - 1) as f64).round() as u32
                } else {
                    0
                };
                Hit {
                    point,
                    range,
                    cos_incidence: rng.gen_range(0.0..1.0),
                    base: self.reflectance.ground,
                    ring,
                }
            })
            .collect()
    }
}

/// Deterministic value in [-1, 1] that is constant over each texture cell.
fn texture_noise(seed: u64, p: [f64; 3], cell: f64) -> f64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for c in p {
        h ^= ((c / cell).floor() as i64) as u64;
        // splitmix64 finalizer
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

struct Hit {
    /// Meters, relative to the sensor's ground footprint.
    point: [f64; 3],
    range: f64,
    cos_incidence: f64,
    base: f64,
    ring: u32,
}

/// Named scenes of the synthetic evaluation corpus.
pub fn planar_corpus() -> Vec<(String, SynthSceneSpec)> {
    let mut out = Vec::new();
    for seed in 1..=8 {
        out.push((format!("urban-{seed:02}"), SynthSceneSpec::urban(seed)));
    }
    for seed in 1..=2 {
        out.push((format!("plane-{seed:02}"), SynthSceneSpec::plane_only(seed)));
    }
    out
}

pub fn noise_corpus() -> Vec<(String, SynthSceneSpec)> {
    (1..=3)
        .map(|seed| (format!("noise-{seed:02}"), SynthSceneSpec::noise(100 + seed)))
        .collect()
}
