//! PLY reading and writing.
//!
//! Both `ascii` and `binary_little_endian` bodies are read. Only the
//! `vertex` element is kept; other elements, list properties included, are
//! parsed and dropped.

use std::io::{BufRead, Read};

use crate::error::{Error, Result};
use crate::types::{PointSoup, RawPoint, Rgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
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

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, Default)]
struct VertexLayout {
    position: [usize; 3],
    color: Option<[usize; 3]>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
}

fn read_line<R: BufRead>(r: &mut R, line: &mut String) -> Result<bool> {
    line.clear();
    Ok(r.read_line(line)? > 0)
}

fn parse_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = String::new();
    if !read_line(r, &mut line)? || line.trim_end() != "ply" {
        return Err(Error::Ply("missing `ply` magic line".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !read_line(r, &mut line)? {
            return Err(Error::Ply("header ends before `end_header`".into()));
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(Error::Ply(format!("unsupported format `{other}`"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| Error::Ply(format!("bad element count `{count}`")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or_else(|| Error::Ply("property before any element".into()))?;
                let scalar = |ty: &str| {
                    Scalar::parse(ty).ok_or_else(|| Error::PlyUnsupportedProperty {
                        property: name.to_string(),
                        ty: ty.to_string(),
                    })
                };
                el.properties.push(Property::List {
                    count: scalar(count)?,
                    item: scalar(item)?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| Error::Ply("property before any element".into()))?;
                let ty = Scalar::parse(ty).ok_or_else(|| Error::PlyUnsupportedProperty {
                    property: name.to_string(),
                    ty: ty.to_string(),
                })?;
                el.properties.push(Property::Scalar { name: name.to_string(), ty });
            }
            _ => return Err(Error::Ply(format!("unrecognized header line `{}`", line.trim_end()))),
        }
    }
    let format = format.ok_or_else(|| Error::Ply("header has no format line".into()))?;
    Ok(Header { format, elements })
}

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let find = |names: &[&str]| {
        el.properties.iter().position(|p| matches!(p, Property::Scalar { name, .. } if names.contains(&name.as_str())))
    };
    let axis = |n: &str| find(&[n]).ok_or_else(|| Error::Ply(format!("vertex element lacks property `{n}`")));
    let position = [axis("x")?, axis("y")?, axis("z")?];
    let color = match (
        find(&["red", "diffuse_red"]),
        find(&["green", "diffuse_green"]),
        find(&["blue", "diffuse_blue"]),
    ) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    Ok(VertexLayout { position, color })
}

fn to_channel(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn vertex(values: &[f64], layout: &VertexLayout) -> RawPoint {
    RawPoint::new(
        layout.position.map(|i| values[i]),
        layout.color.map(|c| Rgb::from_channels(c.map(|i| to_channel(values[i])))),
    )
}

fn read_ascii<R: BufRead>(r: &mut R, header: &Header) -> Result<Vec<RawPoint>> {
    let mut out = Vec::new();
    let mut line = String::new();
    for el in &header.elements {
        let layout = if el.name == "vertex" { Some(vertex_layout(el)?) } else { None };
        let mut values = Vec::with_capacity(el.properties.len());
        let mut found = 0;
        while found < el.count {
            if !read_line(r, &mut line)? {
                return Err(Error::PlyCountMismatch { declared: el.count, found });
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let mut next = || -> Result<f64> {
                let t = tokens.next().ok_or_else(|| Error::Ply(format!("short `{}` record", el.name)))?;
                t.parse::<f64>().map_err(|_| Error::Ply(format!("bad number `{t}`")))
            };
            values.clear();
            for p in &el.properties {
                match p {
                    Property::Scalar { .. } => values.push(next()?),
                    Property::List { .. } => {
                        let n = next()?;
                        for _ in 0..n as usize {
                            next()?;
                        }
                        values.push(n);
                    }
                }
            }
            if let Some(layout) = &layout {
                out.push(vertex(&values, layout));
            }
            found += 1;
        }
    }
    Ok(out)
}

fn read_binary<R: Read>(r: &mut R, header: &Header) -> Result<Vec<RawPoint>> {
    let mut out = Vec::new();
    let mut buf = [0u8; 8];
    for el in &header.elements {
        let layout = if el.name == "vertex" { Some(vertex_layout(el)?) } else { None };
        let mut values = Vec::with_capacity(el.properties.len());
        for found in 0..el.count {
            let truncated = |e: std::io::Error| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => Error::PlyCountMismatch { declared: el.count, found },
                _ => Error::Stream(e),
            };
            let mut scalar = |ty: Scalar| -> Result<f64> {
                let b = &mut buf[..ty.size()];
                r.read_exact(b).map_err(truncated)?;
                Ok(ty.decode_le(b))
            };
            values.clear();
            for p in &el.properties {
                match *p {
                    Property::Scalar { ty, .. } => values.push(scalar(ty)?),
                    Property::List { count, item } => {
                        let n = scalar(count)?;
                        for _ in 0..n as usize {
                            scalar(item)?;
                        }
                        values.push(n);
                    }
                }
            }
            if let Some(layout) = &layout {
                out.push(vertex(&values, layout));
            }
        }
    }
    Ok(out)
}

/// Vertices in file order, with colors when the file has them.
pub fn read_ply<R: BufRead>(mut r: R) -> Result<Vec<RawPoint>> {
    let header = parse_header(&mut r)?;
    if !header.elements.iter().any(|e| e.name == "vertex") {
        return Err(Error::Ply("no `vertex` element".into()));
    }
    match header.format {
        PlyFormat::Ascii => read_ascii(&mut r, &header),
        PlyFormat::BinaryLittleEndian => read_binary(&mut r, &header),
    }
}

/// Integer `uint` coordinates, plus `uchar` colors for colored soups.
pub fn write_ply(soup: &PointSoup, format: PlyFormat) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"ply\n");
    out.extend_from_slice(match format {
        PlyFormat::Ascii => b"format ascii 1.0\n".as_slice(),
        PlyFormat::BinaryLittleEndian => b"format binary_little_endian 1.0\n".as_slice(),
    });
    out.extend_from_slice(format!("element vertex {}\n", soup.len()).as_bytes());
    out.extend_from_slice(b"property uint x\nproperty uint y\nproperty uint z\n");
    if soup.has_color() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.extend_from_slice(b"end_header\n");
    for r in soup.records() {
        let p = r.point.to_array();
        match format {
            PlyFormat::Ascii => {
                let mut line = format!("{} {} {}", p[0], p[1], p[2]);
                if soup.has_color() {
                    let c = r.color;
                    line.push_str(&format!(" {} {} {}", c.r, c.g, c.b));
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
            PlyFormat::BinaryLittleEndian => {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if soup.has_color() {
                    out.extend_from_slice(&r.color.channels());
                }
            }
        }
    }
    out
}
