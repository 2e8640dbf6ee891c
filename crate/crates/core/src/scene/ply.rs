//! Binary little-endian PLY reader and writer for the standard 3DGS vertex layout.
//!
//! Required vertex properties: `x y z opacity scale_0..2 rot_0..3 f_dc_0..2`.
//! Anything else (normals, `f_rest_*`) is skipped. Quaternions are stored
//! w-first, opacities as logits and scales as natural logs.

use std::io::Write;

use nalgebra::{Quaternion, UnitQuaternion};

use super::{GaussianPrimitive, SceneError};
use crate::geometry::Vec3;

const N_REQUIRED: usize = 14;
const REQUIRED: [&str; N_REQUIRED] = [
    "x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1",
    "f_dc_2",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, ScalarType)>,
}

impl Element {
    fn stride(&self) -> usize {
        self.properties.iter().map(|(_, t)| t.size()).sum()
    }
}

fn format_err(msg: impl Into<String>) -> SceneError {
    SceneError::Format(msg.into())
}

fn parse_header(header: &str) -> Result<Vec<Element>, SceneError> {
    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(format_err("missing `ply` magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                let fmt = tok.next().unwrap_or_default();
                if fmt != "binary_little_endian" {
                    return Err(format_err(format!("unsupported format `{fmt}`")));
                }
                format_seen = true;
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| format_err("element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| format_err(format!("bad count for element `{name}`")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| format_err("property before any element"))?;
                let ty = tok.next().unwrap_or_default();
                if ty == "list" {
                    return Err(format_err(format!("list property in element `{}` is not supported", el.name)));
                }
                let ty = ScalarType::parse(ty).ok_or_else(|| format_err(format!("unknown property type `{ty}`")))?;
                let name = tok.next().ok_or_else(|| format_err("property without name"))?;
                el.properties.push((name.to_string(), ty));
            }
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(format_err(format!("unexpected header keyword `{other}`"))),
        }
    }
    if !format_seen {
        return Err(format_err("missing format line"));
    }
    Ok(elements)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parses PLY bytes into activated primitives.
pub fn parse_ply(data: &[u8]) -> Result<Vec<GaussianPrimitive>, SceneError> {
    let marker = b"end_header";
    let end = data.windows(marker.len()).position(|w| w == marker).ok_or_else(|| format_err("missing end_header"))?;
    let header = std::str::from_utf8(&data[..end]).map_err(|_| format_err("header is not UTF-8"))?;
    let mut body = end + marker.len();
    // The header terminator is "\n" or "\r\n".
    if data.get(body) == Some(&b'\r') {
        body += 1;
    }
    if data.get(body) == Some(&b'\n') {
        body += 1;
    }

    let elements = parse_header(header)?;
    let mut offset = body;
    let mut vertex = None;
    for el in &elements {
        if el.name == "vertex" {
            vertex = Some((el, offset));
            break;
        }
        offset += el.stride() * el.count;
    }
    let Some((vertex, start)) = vertex else {
        return Err(format_err("no vertex element"));
    };

    let mut slots = [(0usize, ScalarType::F32); N_REQUIRED];
    let mut cursor = 0;
    let mut layout = Vec::with_capacity(vertex.properties.len());
    for (name, ty) in &vertex.properties {
        layout.push((name.as_str(), *ty, cursor));
        cursor += ty.size();
    }
    for (slot, field) in slots.iter_mut().zip(REQUIRED.iter()) {
        let (_, ty, off) = layout
            .iter()
            .find(|(n, _, _)| n == field)
            .ok_or_else(|| SceneError::Schema { field: field.to_string() })?;
        *slot = (*off, *ty);
    }

    let stride = vertex.stride();
    let needed = start + stride * vertex.count;
    if data.len() < needed {
        return Err(format_err(format!(
            "truncated body: {} vertices need {} bytes, found {}",
            vertex.count,
            needed - start,
            data.len().saturating_sub(start)
        )));
    }

    let mut out = Vec::with_capacity(vertex.count);
    for i in 0..vertex.count {
        let row = &data[start + i * stride..start + (i + 1) * stride];
        let mut v = [0.0; N_REQUIRED];
        for (k, (off, ty)) in slots.iter().enumerate() {
            v[k] = ty.read(&row[*off..]);
            if !v[k].is_finite() {
                return Err(SceneError::Parse { element: i, message: format!("non-finite `{}`", REQUIRED[k]) });
            }
        }
        let q = Quaternion::new(v[7], v[8], v[9], v[10]);
        if q.norm() == 0.0 {
            return Err(SceneError::Parse { element: i, message: "zero-norm rotation".into() });
        }
        let scale = Vec3::new(v[4].exp(), v[5].exp(), v[6].exp());
        if !scale.iter().all(|s| s.is_finite()) {
            return Err(SceneError::Parse { element: i, message: "scale overflows".into() });
        }
        out.push(GaussianPrimitive {
            position: Vec3::new(v[0], v[1], v[2]),
            scale,
            rotation: UnitQuaternion::from_quaternion(q),
            opacity: sigmoid(v[3]),
            color_dc: Vec3::new(v[11], v[12], v[13]),
        });
    }
    Ok(out)
}

/// Writes primitives in the standard layout, inverting the activations.
pub fn write_ply<W: Write>(primitives: &[GaussianPrimitive], mut w: W) -> std::io::Result<()> {
    let props = [
        "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
        "rot_0", "rot_1", "rot_2", "rot_3",
    ];
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", primitives.len())?;
    for p in props {
        writeln!(w, "property float {p}")?;
    }
    writeln!(w, "end_header")?;
    for g in primitives {
        let o = g.opacity.clamp(1e-6, 1.0 - 1e-6);
        let q = g.rotation.quaternion();
        let row = [
            g.position.x,
            g.position.y,
            g.position.z,
            0.0,
            0.0,
            0.0,
            g.color_dc.x,
            g.color_dc.y,
            g.color_dc.z,
            (o / (1.0 - o)).ln(),
            g.scale.x.ln(),
            g.scale.y.ln(),
            g.scale.z.ln(),
            q.w,
            q.i,
            q.j,
            q.k,
        ];
        for value in row {
            w.write_all(&(value as f32).to_le_bytes())?;
        }
    }
    Ok(())
}
