//! Minimal PLY 1.0 reader/writer for `vertex` elements carrying x/y/z and a
//! reflectance scalar. ASCII and binary little-endian only.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{PointCloud, Position, GEOMETRY_BITS, MAX_ATTR_BITDEPTH, MAX_COORD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// How stored reflectance values map to integer attribute units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectanceKind {
    /// Values are already integers (float storage is rounded half-up).
    Integer,
    /// Values lie in `[0, 1]` and are scaled by `2^bitdepth - 1`.
    UnitFloat { bitdepth: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlyDescriptor {
    /// Multiplier applied to coordinates. Clouds with negative coordinates, or
    /// that would overflow the grid, first have their minimum corner moved to
    /// the origin.
    pub position_scale: f64,
    /// `reflectance` and `intensity` are treated as aliases of each other.
    pub reflectance_property: String,
    pub reflectance_kind: ReflectanceKind,
}

impl Default for PlyDescriptor {
    fn default() -> Self {
        PlyDescriptor {
            position_scale: 1.0,
            reflectance_property: "reflectance".into(),
            reflectance_kind: ReflectanceKind::Integer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::Ply(msg.into())
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = Vec::new();
    let mut next_line = |r: &mut R| -> Result<String> {
        line.clear();
        if r.read_until(b'\n', &mut line)? == 0 {
            return Err(malformed("unexpected end of header"));
        }
        let s = std::str::from_utf8(&line).map_err(|_| malformed("header is not UTF-8"))?;
        Ok(s.trim_end_matches(['\r', '\n']).to_string())
    };

    if next_line(r)?.trim() != "ply" {
        return Err(malformed("missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(r)?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["end_header"] => break,
            ["format", kind, version] => {
                if *version != "1.0" {
                    return Err(Error::Unsupported(format!("PLY version {version}")));
                }
                format = Some(match *kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(Error::Unsupported(format!("PLY format `{other}`"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| malformed(format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", count_ty, item_ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before element"))?;
                let count = Scalar::parse(count_ty)
                    .ok_or_else(|| malformed(format!("unknown type `{count_ty}`")))?;
                let item = Scalar::parse(item_ty)
                    .ok_or_else(|| malformed(format!("unknown type `{item_ty}`")))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::List { count, item },
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before element"))?;
                let s = Scalar::parse(ty).ok_or_else(|| malformed(format!("unknown type `{ty}`")))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::Scalar(s),
                });
            }
            _ => return Err(malformed(format!("unrecognized header line `{l}`"))),
        }
    }
    let format = format.ok_or_else(|| malformed("missing format line"))?;
    Ok(Header { format, elements })
}

/// Skips one binary element record that may contain list properties.
fn skip_binary_record<R: Read>(r: &mut R, el: &Element) -> Result<()> {
    let mut buf = [0u8; 8];
    for p in &el.props {
        match p.kind {
            PropKind::Scalar(s) => r.read_exact(&mut buf[..s.size()])?,
            PropKind::List { count, item } => {
                r.read_exact(&mut buf[..count.size()])?;
                let n = count.read_le(&buf) as usize;
                std::io::copy(&mut r.take((n * item.size()) as u64), &mut std::io::sink())?;
            }
        }
    }
    Ok(())
}

/// Reads the requested scalar columns of the `vertex` element.
fn read_vertex_columns(path: &Path, wanted: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header(&mut r)?;
    let vidx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| malformed("no `vertex` element"))?;
    let vertex = header.elements[vidx].clone();

    let mut cols = Vec::with_capacity(wanted.len());
    for w in wanted {
        let i = vertex
            .props
            .iter()
            .position(|p| p.name == *w)
            .ok_or_else(|| Error::MissingProperty(w.to_string()))?;
        if matches!(vertex.props[i].kind, PropKind::List { .. }) {
            return Err(Error::Unsupported(format!("list property `{w}`")));
        }
        cols.push(i);
    }
    if vertex.props.iter().any(|p| matches!(p.kind, PropKind::List { .. })) {
        return Err(Error::Unsupported("list properties in `vertex`".into()));
    }

    let mut out = vec![Vec::with_capacity(vertex.count); wanted.len()];
    match header.format {
        PlyFormat::Ascii => {
            let mut lines = r.lines();
            let mut next_record = || -> Result<String> {
                loop {
                    let l = lines
                        .next()
                        .ok_or_else(|| malformed("truncated ASCII body"))??;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
            };
            for el in &header.elements[..vidx] {
                for _ in 0..el.count {
                    next_record()?;
                }
            }
            for _ in 0..vertex.count {
                let l = next_record()?;
                let toks: Vec<&str> = l.split_whitespace().collect();
                if toks.len() < vertex.props.len() {
                    return Err(malformed(format!("short vertex record `{l}`")));
                }
                for (col, &pi) in out.iter_mut().zip(&cols) {
                    let v: f64 = toks[pi]
                        .parse()
                        .map_err(|_| malformed(format!("bad number `{}`", toks[pi])))?;
                    col.push(v);
                }
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for el in &header.elements[..vidx] {
                for _ in 0..el.count {
                    skip_binary_record(&mut r, el)?;
                }
            }
            let mut offsets = Vec::with_capacity(vertex.props.len());
            let mut stride = 0;
            for p in &vertex.props {
                let PropKind::Scalar(s) = p.kind else { unreachable!() };
                offsets.push((stride, s));
                stride += s.size();
            }
            let mut rec = vec![0u8; stride];
            for _ in 0..vertex.count {
                r.read_exact(&mut rec).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::UnexpectedEof {
                        malformed("truncated binary body")
                    } else {
                        Error::Io(e)
                    }
                })?;
                for (col, &pi) in out.iter_mut().zip(&cols) {
                    let (off, s) = offsets[pi];
                    col.push(s.read_le(&rec[off..off + s.size()]));
                }
            }
        }
    }
    Ok(out)
}

fn voxelize(xs: &[f64], ys: &[f64], zs: &[f64], scale: f64) -> Result<Vec<Position>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("position scale {scale}")));
    }
    let axes = [xs, ys, zs];
    let mut mins = [0.0f64; 3];
    for (m, axis) in mins.iter_mut().zip(axes) {
        if axis.iter().any(|v| !v.is_finite()) {
            return Err(malformed("non-finite coordinate"));
        }
        *m = axis.iter().copied().fold(f64::INFINITY, f64::min);
    }
    // Clouds that already fit the non-negative grid keep their coordinates,
    // so the origin (and with it normal orientation) survives a save/load.
    let fits = axes.iter().zip(&mins).all(|(axis, &m)| {
        m >= 0.0
            && axis.iter().copied().fold(0.0f64, f64::max) * scale + 0.5 < MAX_COORD as f64 + 1.0
    });
    if fits {
        mins = [0.0; 3];
    }
    let mut out = vec![[0u32; 3]; xs.len()];
    for (a, axis) in axes.iter().enumerate() {
        for (p, &v) in out.iter_mut().zip(axis.iter()) {
            let q = ((v - mins[a]) * scale + 0.5).floor();
            if q > MAX_COORD as f64 {
                return Err(Error::CoordinateOverflow {
                    value: q as u64,
                    bits: GEOMETRY_BITS,
                });
            }
            p[a] = q as u32;
        }
    }
    Ok(out)
}

fn is_color_name(name: &str) -> bool {
    matches!(
        name,
        "red" | "green" | "blue" | "alpha" | "r" | "g" | "b" | "diffuse_red" | "diffuse_green"
            | "diffuse_blue"
    )
}

fn reflectance_alias(name: &str) -> Option<&'static str> {
    match name {
        "reflectance" => Some("intensity"),
        "intensity" => Some("reflectance"),
        _ => None,
    }
}

fn convert_reflectance(v: f64, kind: ReflectanceKind) -> Result<u32> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidCloud(format!("reflectance {v} is not a non-negative number")));
    }
    let max = (1u64 << MAX_ATTR_BITDEPTH) as f64;
    let q = match kind {
        ReflectanceKind::Integer => (v + 0.5).floor(),
        ReflectanceKind::UnitFloat { bitdepth } => {
            if bitdepth == 0 || bitdepth > MAX_ATTR_BITDEPTH {
                return Err(Error::InvalidParameter(format!("unit-float bit depth {bitdepth}")));
            }
            if v > 1.0 {
                return Err(Error::InvalidCloud(format!("unit-float reflectance {v} exceeds 1")));
            }
            (v * ((1u64 << bitdepth) - 1) as f64 + 0.5).floor()
        }
    };
    if q >= max {
        return Err(Error::InvalidCloud(format!("reflectance {v} is out of range")));
    }
    Ok(q as u32)
}

/// Loads a point cloud and voxelizes it with round-half-up, translating the
/// minimum corner to the origin only when the raw coordinates do not fit. Point order is preserved.
pub fn load_ply(path: impl AsRef<Path>, desc: &PlyDescriptor) -> Result<PointCloud> {
    let path = path.as_ref();
    let name = desc.reflectance_property.as_str();
    if is_color_name(name) {
        return Err(Error::Unsupported(format!(
            "color attribute `{name}`; only reflectance/intensity scalars are supported"
        )));
    }
    let cols = match read_vertex_columns(path, &["x", "y", "z", name]) {
        Err(Error::MissingProperty(p)) if p == name && reflectance_alias(name).is_some() => {
            let alias = reflectance_alias(name).unwrap();
            read_vertex_columns(path, &["x", "y", "z", alias]).map_err(|e| match e {
                Error::MissingProperty(p) if p == alias => Error::MissingProperty(name.into()),
                other => other,
            })?
        }
        other => other?,
    };
    let positions = voxelize(&cols[0], &cols[1], &cols[2], desc.position_scale)?;
    let reflectances = cols[3]
        .iter()
        .map(|&v| convert_reflectance(v, desc.reflectance_kind))
        .collect::<Result<Vec<_>>>()?;
    PointCloud::new(positions, reflectances)
}

/// Loads geometry only; any reflectance property is ignored.
pub fn load_ply_positions(path: impl AsRef<Path>, position_scale: f64) -> Result<Vec<Position>> {
    let cols = read_vertex_columns(path.as_ref(), &["x", "y", "z"])?;
    let positions = voxelize(&cols[0], &cols[1], &cols[2], position_scale)?;
    if positions.is_empty() {
        return Err(Error::InvalidCloud("cloud has no points".into()));
    }
    Ok(positions)
}

/// Writes integer coordinates (`int32`) and reflectance (`uint16`, or
/// `uint32` above 16 bits).
pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let wide = cloud.attr_bitdepth() > 16;
    let format_name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        w,
        "ply\nformat {format_name} 1.0\ncomment lacn\nelement vertex {}\n\
         property int32 x\nproperty int32 y\nproperty int32 z\n\
         property {} reflectance\nend_header\n",
        cloud.len(),
        if wide { "uint32" } else { "uint16" }
    )?;
    let rows = cloud.positions().iter().zip(cloud.reflectances());
    match format {
        PlyFormat::Ascii => {
            for (p, r) in rows {
                writeln!(w, "{} {} {} {}", p[0], p[1], p[2], r)?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for (p, &r) in rows {
                for c in p {
                    w.write_all(&(*c as i32).to_le_bytes())?;
                }
                if wide {
                    w.write_all(&r.to_le_bytes())?;
                } else {
                    w.write_all(&(r as u16).to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
