use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use lacn_core::model::{
    load_ply, load_ply_positions, save_ply, PlyDescriptor, PlyFormat, ReflectanceKind,
};
use lacn_core::report::{bench_configs, run_bench, BenchConfig};
use lacn_core::synth::{noise_corpus, planar_corpus, SynthSceneSpec};
use lacn_core::{
    decode, encode, AttributeBitstream, CodecConfig, CodecStats, IdwExponent, Orientation,
    PointCloud, ThresholdPolicy,
};

/// Lossless LiDAR reflectance codec.
#[derive(Parser)]
#[command(name = "lacn", version)]
struct Cli {
    /// JSON configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode the reflectance of a PLY cloud.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        codec: CodecFlags,
    },
    /// Decode a stream against its geometry and write the full cloud.
    Decode {
        input: PathBuf,
        geometry: PathBuf,
        output: PathBuf,
    },
    /// Encode, decode and compare; exits 0 iff the round trip is bit-exact.
    Verify {
        input: PathBuf,
        #[command(flatten)]
        codec: CodecFlags,
    },
    /// Compare baseline and normal-guided rates on every PLY in a directory.
    Bench {
        dir: PathBuf,
        /// Run the parameter grid instead of the default configuration.
        #[arg(long)]
        sweep: bool,
        /// Write the CSV here instead of after the table on stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a synthetic LiDAR scene from a JSON spec.
    Synth { spec: PathBuf, output: PathBuf },
    /// Write the standard synthetic corpus (planar and noise scenes).
    Corpus { dir: PathBuf },
}

#[derive(Args, Default)]
struct CodecFlags {
    /// Disable the normal-guided fallback (distance-only baseline).
    #[arg(long)]
    no_normal_branch: bool,
    /// Neighborhood size for normal estimation.
    #[arg(long = "normals-n", value_name = "N")]
    normals_n: Option<u8>,
    /// Number of LOD levels.
    #[arg(long, value_name = "L")]
    lod_levels: Option<u8>,
    /// Adaptive max_diff threshold 2^(bitdepth - S).
    #[arg(long, value_name = "S", conflicts_with = "threshold")]
    threshold_shift: Option<u8>,
    /// Fixed max_diff threshold.
    #[arg(long, value_name = "T")]
    threshold: Option<u16>,
    /// Inverse-distance weight exponent.
    #[arg(long, value_name = "E", value_parser = ["1", "2"])]
    idw_exp: Option<String>,
    #[arg(long, value_enum)]
    orientation: Option<OrientationArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum OrientationArg {
    Origin,
    Center,
}

/// Contents of `--config`. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    normal_branch: Option<bool>,
    normals_n: Option<u8>,
    lod_levels: Option<u8>,
    lod_base_dist2: Option<u32>,
    lod_growth: Option<u8>,
    threshold_shift: Option<u8>,
    threshold: Option<u16>,
    idw_exp: Option<u8>,
    orientation: Option<OrientationArg>,
    /// Coordinate multiplier applied when reading PLY files.
    position_scale: Option<f64>,
    reflectance_property: Option<String>,
    /// Treat reflectance as floats in [0, 1] scaled to this many bits.
    unit_float_bitdepth: Option<u8>,
    /// Extra PLY files for `bench`, e.g. locally held evaluation sequences.
    corpus: Vec<PathBuf>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    fn ply(&self) -> PlyDescriptor {
        let mut d = PlyDescriptor::default();
        if let Some(s) = self.position_scale {
            d.position_scale = s;
        }
        if let Some(p) = &self.reflectance_property {
            d.reflectance_property = p.clone();
        }
        if let Some(bitdepth) = self.unit_float_bitdepth {
            d.reflectance_kind = ReflectanceKind::UnitFloat { bitdepth };
        }
        d
    }

    fn codec(&self, flags: &CodecFlags) -> Result<CodecConfig> {
        let mut c = CodecConfig::default();
        if let Some(b) = self.normal_branch {
            c.normal_branch = b;
        }
        if flags.no_normal_branch {
            c.normal_branch = false;
        }
        if let Some(n) = flags.normals_n.or(self.normals_n) {
            c.normal_neighbors = n;
        }
        if let Some(l) = flags.lod_levels.or(self.lod_levels) {
            c.lod.num_levels = l;
        }
        if let Some(d) = self.lod_base_dist2 {
            c.lod.base_dist2 = d;
        }
        if let Some(g) = self.lod_growth {
            c.lod.growth = g;
        }
        let from_flags = match (flags.threshold, flags.threshold_shift) {
            (Some(t), _) => Some(ThresholdPolicy::Fixed(t)),
            (None, Some(shift)) => Some(ThresholdPolicy::Adaptive { shift }),
            (None, None) => None,
        };
        let from_file = match (self.threshold, self.threshold_shift) {
            (Some(_), Some(_)) => bail!("config sets both threshold and threshold_shift"),
            (Some(t), None) => Some(ThresholdPolicy::Fixed(t)),
            (None, Some(shift)) => Some(ThresholdPolicy::Adaptive { shift }),
            (None, None) => None,
        };
        if let Some(t) = from_flags.or(from_file) {
            c.threshold = t;
        }
        let exp = match flags.idw_exp.as_deref() {
            Some(e) => Some(e.parse::<u8>()?),
            None => self.idw_exp,
        };
        match exp {
            None => {}
            Some(1) => c.idw = IdwExponent::Linear,
            Some(2) => c.idw = IdwExponent::Squared,
            Some(e) => bail!("idw exponent must be 1 or 2, got {e}"),
        }
        if let Some(o) = flags.orientation.or(self.orientation) {
            c.orientation = match o {
                OrientationArg::Origin => Orientation::TowardOrigin,
                OrientationArg::Center => Orientation::TowardBoundsCenter,
            };
        }
        Ok(c)
    }
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    config: String,
    bytes: usize,
    seconds: f64,
    #[serde(flatten)]
    stats: Option<&'a CodecStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lossless: Option<bool>,
}

impl Report<'_> {
    fn print(&self) -> Result<()> {
        println!("{}", serde_json::to_string(self)?);
        let mut rows: Vec<(&str, String)> = vec![
            ("input", self.input.clone()),
            ("config", self.config.clone()),
            ("bytes", self.bytes.to_string()),
            ("seconds", format!("{:.3}", self.seconds)),
        ];
        if let Some(o) = &self.output {
            rows.insert(1, ("output", o.clone()));
        }
        if let Some(s) = self.stats {
            rows.extend([
                ("points", s.points.to_string()),
                ("bpip", format!("{:.4}", s.bpip)),
                ("signaled", s.signaled.to_string()),
                ("implicit idw", s.implicit_idw.to_string()),
                ("implicit neighbor1", s.implicit_neighbor1.to_string()),
                (
                    "modes 0/1/2/3",
                    s.mode_counts.map(|c| c.to_string()).join(" / "),
                ),
            ]);
        }
        if let Some(ok) = self.lossless {
            rows.push(("lossless", ok.to_string()));
        }
        for (k, v) in rows {
            println!("  {k:<20} {v}");
        }
        Ok(())
    }
}

fn label(c: &CodecConfig) -> String {
    let branch = if c.normal_branch { "enhanced" } else { "baseline" };
    format!("{branch} {}", lacn_core::report::config_label(c))
}

fn read_stream(path: &Path) -> Result<(Vec<u8>, AttributeBitstream)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let bs = AttributeBitstream::from_bytes(&bytes)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((bytes, bs))
}

fn load(path: &Path, cfg: &ConfigFile) -> Result<PointCloud> {
    load_ply(path, &cfg.ply()).with_context(|| format!("loading {}", path.display()))
}

fn ply_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")))
        .collect();
    files.sort();
    Ok(files)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Encode {
            input,
            output,
            codec,
        } => {
            let config = file.codec(&codec)?;
            let start = Instant::now();
            let cloud = load(&input, &file)?;
            let (bs, stats) = encode(&cloud, &config)?;
            let bytes = bs.to_bytes();
            std::fs::write(&output, &bytes)
                .with_context(|| format!("writing {}", output.display()))?;
            Report {
                command: "encode",
                input: input.display().to_string(),
                output: Some(output.display().to_string()),
                config: label(&config),
                bytes: bytes.len(),
                seconds: start.elapsed().as_secs_f64(),
                stats: Some(&stats),
                lossless: None,
            }
            .print()?;
        }
        Command::Decode {
            input,
            geometry,
            output,
        } => {
            let start = Instant::now();
            let (bytes, bs) = read_stream(&input)?;
            let desc = file.ply();
            let positions = load_ply_positions(&geometry, desc.position_scale)
                .with_context(|| format!("loading geometry {}", geometry.display()))?;
            let cloud = decode(&bs, &positions).with_context(|| {
                format!("decoding {} against {}", input.display(), geometry.display())
            })?;
            save_ply(&cloud, &output, PlyFormat::BinaryLittleEndian)
                .with_context(|| format!("writing {}", output.display()))?;
            Report {
                command: "decode",
                input: input.display().to_string(),
                output: Some(output.display().to_string()),
                config: label(&bs.header.config),
                bytes: bytes.len(),
                seconds: start.elapsed().as_secs_f64(),
                stats: None,
                lossless: None,
            }
            .print()?;
        }
        Command::Verify { input, codec } => {
            let config = file.codec(&codec)?;
            let start = Instant::now();
            let cloud = load(&input, &file)?;
            let (bs, stats) = encode(&cloud, &config)?;
            let bytes = bs.to_bytes();
            let parsed = AttributeBitstream::from_bytes(&bytes)?;
            let decoded = decode(&parsed, cloud.positions())?;
            let first_bad = decoded
                .reflectances()
                .iter()
                .zip(cloud.reflectances())
                .position(|(a, b)| a != b);
            Report {
                command: "verify",
                input: input.display().to_string(),
                output: None,
                config: label(&config),
                bytes: bytes.len(),
                seconds: start.elapsed().as_secs_f64(),
                stats: Some(&stats),
                lossless: Some(first_bad.is_none()),
            }
            .print()?;
            if let Some(i) = first_bad {
                eprintln!(
                    "error: point {i} decoded to {} but was {}",
                    decoded.reflectances()[i],
                    cloud.reflectances()[i]
                );
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Bench { dir, sweep, csv } => {
            let mut files = ply_files(&dir)?;
            files.extend(file.corpus.iter().cloned());
            if files.is_empty() {
                bail!("no PLY files in {}", dir.display());
            }
            let clouds = files
                .iter()
                .map(|p| {
                    let name = p.file_stem().map_or_else(
                        || p.display().to_string(),
                        |s| s.to_string_lossy().into_owned(),
                    );
                    Ok((name, load(p, &file)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let configs: Vec<BenchConfig> = if sweep {
                bench_configs(true)
            } else {
                vec![BenchConfig::new(file.codec(&CodecFlags::default())?)]
            };
            let report = run_bench(&clouds, &configs)?;
            print!("{}", report.to_table());
            match csv {
                Some(path) => std::fs::write(&path, report.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("\n{}", report.to_csv()),
            }
        }
        Command::Synth { spec, output } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let spec: SynthSceneSpec = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", spec.display()))?;
            let cloud = spec.generate()?;
            save_ply(&cloud, &output, PlyFormat::BinaryLittleEndian)
                .with_context(|| format!("writing {}", output.display()))?;
            println!(
                "{}",
                serde_json::json!({
                    "command": "synth",
                    "output": output.display().to_string(),
                    "points": cloud.len(),
                    "attr_bitdepth": cloud.attr_bitdepth(),
                })
            );
        }
        Command::Corpus { dir } => {
            std::fs::create_dir_all(&dir)
                .with_context(|| format!("creating {}", dir.display()))?;
            for (name, spec) in planar_corpus().into_iter().chain(noise_corpus()) {
                let cloud = spec.generate()?;
                let path = dir.join(format!("{name}.ply"));
                save_ply(&cloud, &path, PlyFormat::BinaryLittleEndian)
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("{}  {} points", path.display(), cloud.len());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
