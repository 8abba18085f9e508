//! Minimal PLY support: ASCII and little-endian binary, vertex elements with
//! scalar properties. Other elements, list properties included, are skipped.

use std::io::{BufRead, Write};
use std::path::Path;

use rvsm_core::{ClassId, LabeledPointCloud};

use crate::json::format_f64;
use crate::{Error, Location, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scalar {
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
    fn parse(name: &str) -> Option<Self> {
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

    fn name(self) -> &'static str {
        match self {
            Scalar::I8 => "char",
            Scalar::U8 => "uchar",
            Scalar::I16 => "short",
            Scalar::U16 => "ushort",
            Scalar::I32 => "int",
            Scalar::U32 => "uint",
            Scalar::F32 => "float",
            Scalar::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => f64::from(b[0] as i8),
            Scalar::U8 => f64::from(b[0]),
            Scalar::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Scalar::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Scalar::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("eight bytes")),
        }
    }

    fn parse_text(self, token: &str) -> Option<f64> {
        if self.is_float() {
            token.parse().ok()
        } else {
            token.parse::<i64>().ok().map(|v| v as f64)
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, Property)>,
}

#[derive(Debug)]
struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    /// Lines taken by the header, `end_header` included.
    lines: u64,
}

fn read_header(r: &mut impl BufRead, path: &Path) -> Result<Header> {
    let mut line_no = 0u64;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = r.read_until(b'\n', &mut buf).map_err(|e| Error::io(path, e))?;
        line_no += 1;
        let loc = Location::Line(line_no);
        if n == 0 {
            return Err(Error::parse(path, loc, "header ended before end_header"));
        }
        let text = std::str::from_utf8(&buf).map_err(|_| Error::parse(path, loc, "header is not ASCII"))?;
        let words: Vec<&str> = text.split_whitespace().collect();
        if line_no == 1 {
            if words != ["ply"] {
                return Err(Error::parse(path, loc, "missing ply magic"));
            }
            continue;
        }
        match words.as_slice() {
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(PlyEncoding::BinaryLittleEndian),
            ["format", other, ..] => {
                return Err(Error::parse(path, loc, format!("unsupported PLY format {other}; only ascii and binary_little_endian are read")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| Error::parse(path, loc, format!("bad element count {count:?}")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            ["property", "list", count, item, name] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(Error::parse(path, loc, "unknown list property type"));
                };
                let el = elements.last_mut().ok_or_else(|| Error::parse(path, loc, "property before any element"))?;
                el.properties.push((name.to_string(), Property::List { count, item }));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| Error::parse(path, loc, format!("unknown property type {ty:?}")))?;
                let el = elements.last_mut().ok_or_else(|| Error::parse(path, loc, "property before any element"))?;
                el.properties.push((name.to_string(), Property::Scalar(ty)));
            }
            ["end_header"] => break,
            _ => return Err(Error::parse(path, loc, format!("unrecognized header line {:?}", text.trim_end()))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::format(path, "PLY header has no format line"))?;
    Ok(Header { encoding, elements, lines: line_no })
}

/// Column positions of x, y, z and label within the vertex properties.
struct VertexLayout {
    columns: [usize; 4],
}

fn vertex_layout(el: &Element, path: &Path) -> Result<VertexLayout> {
    let mut columns = [0; 4];
    for (k, want) in ["x", "y", "z", "label"].into_iter().enumerate() {
        let (pos, ty) = el
            .properties
            .iter()
            .enumerate()
            .find_map(|(i, (name, p))| match p {
                Property::Scalar(t) if name == want => Some((i, *t)),
                _ => None,
            })
            .ok_or_else(|| Error::format(path, format!("vertex element has no scalar {want} property")))?;
        let ok = if k < 3 { ty.is_float() } else { !ty.is_float() };
        if !ok {
            let need = if k < 3 { "a float" } else { "an integer" };
            return Err(Error::format(path, format!("property {want} must be {need} type, found {}", ty.name())));
        }
        columns[k] = pos;
    }
    Ok(VertexLayout { columns })
}

fn label_from(v: f64, path: &Path, loc: Location) -> Result<ClassId> {
    if v >= 0.0 && v <= f64::from(u32::MAX) {
        Ok(v as ClassId)
    } else {
        Err(Error::parse(path, loc, format!("label {v} is not a valid class id")))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }
}

fn skip_binary(cur: &mut Cursor<'_>, el: &Element) -> Option<()> {
    for _ in 0..el.count {
        for (_, p) in &el.properties {
            match p {
                Property::Scalar(t) => {
                    cur.take(t.size())?;
                }
                Property::List { count, item } => {
                    let n = count.decode(cur.take(count.size())?);
                    cur.take(n as usize * item.size())?;
                }
            }
        }
    }
    Some(())
}

fn read_binary(bytes: &[u8], header: &Header, path: &Path) -> Result<LabeledPointCloud> {
    let mut cur = Cursor { bytes, pos: 0 };
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for el in &header.elements {
        if el.name != "vertex" {
            skip_binary(&mut cur, el).ok_or_else(|| Error::format(path, format!("truncated {} element data", el.name)))?;
            continue;
        }
        let layout = vertex_layout(el, path)?;
        let mut row = vec![0.0; el.properties.len()];
        for i in 0..el.count {
            let loc = Location::Vertex(i);
            for (k, (_, p)) in el.properties.iter().enumerate() {
                let Property::Scalar(t) = p else {
                    return Err(Error::format(path, "list properties on vertices are not supported"));
                };
                let b = cur.take(t.size()).ok_or_else(|| Error::parse(path, loc, "unexpected end of vertex data"))?;
                row[k] = t.decode(b);
            }
            push_vertex(&row, &layout, path, loc, &mut points, &mut labels)?;
        }
    }
    Ok(LabeledPointCloud::new(points, labels)?)
}

fn push_vertex(
    row: &[f64],
    layout: &VertexLayout,
    path: &Path,
    loc: Location,
    points: &mut Vec<[f64; 3]>,
    labels: &mut Vec<ClassId>,
) -> Result<()> {
    let c = layout.columns;
    let p = [row[c[0]], row[c[1]], row[c[2]]];
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::parse(path, loc, format!("non-finite coordinate in point {}", points.len())));
    }
    labels.push(label_from(row[c[3]], path, loc)?);
    points.push(p);
    Ok(())
}

fn read_ascii(text: &str, header: &Header, path: &Path) -> Result<LabeledPointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (header.lines + 1 + i as u64, l));
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for el in &header.elements {
        let layout = if el.name == "vertex" { Some(vertex_layout(el, path)?) } else { None };
        for _ in 0..el.count {
            let (line_no, line) =
                lines.next().ok_or_else(|| Error::format(path, format!("file ends inside the {} element", el.name)))?;
            let loc = Location::Line(line_no);
            let Some(layout) = &layout else { continue };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != el.properties.len() {
                return Err(Error::parse(path, loc, format!("expected {} values, found {}", el.properties.len(), tokens.len())));
            }
            let mut row = vec![0.0; tokens.len()];
            for (k, (name, p)) in el.properties.iter().enumerate() {
                let Property::Scalar(t) = p else {
                    return Err(Error::format(path, "list properties on vertices are not supported"));
                };
                row[k] = t.parse_text(tokens[k]).ok_or_else(|| Error::parse(path, loc, format!("invalid {name} value {:?}", tokens[k])))?;
            }
            push_vertex(&row, layout, path, loc, &mut points, &mut labels)?;
        }
    }
    Ok(LabeledPointCloud::new(points, labels)?)
}

pub(crate) fn read_cloud(mut r: impl BufRead, path: &Path) -> Result<LabeledPointCloud> {
    let header = read_header(&mut r, path)?;
    if !header.elements.iter().any(|e| e.name == "vertex") {
        return Err(Error::format(path, "PLY file has no vertex element"));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;
    match header.encoding {
        PlyEncoding::BinaryLittleEndian => read_binary(&body, &header, path),
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(&body).map_err(|_| Error::format(path, "ASCII PLY body is not valid UTF-8"))?;
            read_ascii(text, &header, path)
        }
    }
}

/// A value of one vertex property.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Value {
    F64(f64),
    U8(u8),
    I32(i32),
}

impl Value {
    fn scalar(self) -> Scalar {
        match self {
            Value::F64(_) => Scalar::F64,
            Value::U8(_) => Scalar::U8,
            Value::I32(_) => Scalar::I32,
        }
    }
}

/// Writes a single vertex element. Every row must match `names` in length
/// and carry the same value types as the first row.
pub(crate) fn write_vertices(
    mut w: impl Write,
    encoding: PlyEncoding,
    comment: &str,
    names: &[&str],
    rows: impl ExactSizeIterator<Item = Vec<Value>>,
    types: &[Scalar],
) -> std::io::Result<()> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {format} 1.0\ncomment {comment}\nelement vertex {}", rows.len())?;
    for (name, ty) in names.iter().zip(types) {
        writeln!(w, "property {} {name}", ty.name())?;
    }
    writeln!(w, "end_header")?;
    for row in rows {
        debug_assert!(row.iter().map(|v| v.scalar()).eq(types.iter().copied()));
        match encoding {
            PlyEncoding::BinaryLittleEndian => {
                for v in row {
                    match v {
                        Value::F64(x) => w.write_all(&x.to_le_bytes())?,
                        Value::U8(x) => w.write_all(&[x])?,
                        Value::I32(x) => w.write_all(&x.to_le_bytes())?,
                    }
                }
            }
            PlyEncoding::Ascii => {
                let text: Vec<String> = row
                    .iter()
                    .map(|v| match v {
                        Value::F64(x) => format_f64(*x),
                        Value::U8(x) => x.to_string(),
                        Value::I32(x) => x.to_string(),
                    })
                    .collect();
                writeln!(w, "{}", text.join(" "))?;
            }
        }
    }
    w.flush()
}

pub(crate) fn label_value(label: ClassId, path: &Path) -> Result<Value> {
    i32::try_from(label)
        .map(Value::I32)
        .map_err(|_| Error::format(path, format!("label {label} does not fit the PLY int label property")))
}

pub fn write_cloud(cloud: &LabeledPointCloud, w: impl Write, encoding: PlyEncoding, path: &Path) -> Result<()> {
    let labels = cloud.labels().iter().map(|&l| label_value(l, path)).collect::<Result<Vec<_>>>()?;
    let rows = cloud
        .points()
        .iter()
        .zip(labels)
        .map(|(p, l)| vec![Value::F64(p[0]), Value::F64(p[1]), Value::F64(p[2]), l]);
    let types = [Scalar::F64, Scalar::F64, Scalar::F64, Scalar::I32];
    write_vertices(w, encoding, "rvsm labeled point cloud", &["x", "y", "z", "label"], rows, &types)
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabeledPointCloud {
        LabeledPointCloud::new(vec![[0.1, -2.0, 3.5e-7], [1.0 / 3.0, 0.0, -0.0]], vec![4, 7]).unwrap()
    }

    fn round_trip(encoding: PlyEncoding) -> LabeledPointCloud {
        let mut out = Vec::new();
        write_cloud(&sample(), &mut out, encoding, Path::new("s.ply")).unwrap();
        read_cloud(out.as_slice(), Path::new("s.ply")).unwrap()
    }

    #[test]
    fn both_encodings_round_trip() {
        assert_eq!(round_trip(PlyEncoding::Ascii), sample());
        assert_eq!(round_trip(PlyEncoding::BinaryLittleEndian), sample());
    }

    #[test]
    fn reads_float32_with_extra_elements() {
        let mut data = b"ply\nformat binary_little_endian 1.0\ncomment x\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty ushort label\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for (p, label) in [([1.5f32, 2.0, -1.0], 3u16), ([0.25, 0.0, 8.0], 9)] {
            for c in p {
                data.extend_from_slice(&c.to_le_bytes());
            }
            data.push(200);
            data.extend_from_slice(&label.to_le_bytes());
        }
        data.push(2);
        data.extend_from_slice(&0i32.to_le_bytes());
        data.extend_from_slice(&1i32.to_le_bytes());
        let cloud = read_cloud(data.as_slice(), Path::new("f.ply")).unwrap();
        assert_eq!(cloud.points(), &[[1.5, 2.0, -1.0], [0.25, 0.0, 8.0]]);
        assert_eq!(cloud.labels(), &[3, 9]);
    }

    #[test]
    fn ascii_errors_name_the_line() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty int label\nend_header\n0 0 0 1\n0 nan 0 1\n";
        let err = read_cloud(text.as_bytes(), Path::new("a.ply")).unwrap_err().to_string();
        assert!(err.contains("line 10"), "{err}");
        assert!(err.contains("point 1"), "{err}");
    }

    #[test]
    fn binary_errors_name_the_vertex() {
        let mut data = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nproperty int label\nend_header\n".to_vec();
        for c in [0.0f64, 0.0, 0.0] {
            data.extend_from_slice(&c.to_le_bytes());
        }
        data.extend_from_slice(&1i32.to_le_bytes());
        data.extend_from_slice(&1.0f64.to_le_bytes());
        let err = read_cloud(data.as_slice(), Path::new("b.ply")).unwrap_err().to_string();
        assert!(err.contains("vertex 1"), "{err}");
    }

    #[test]
    fn rejects_big_endian_and_wrong_types() {
        let be = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(read_cloud(be.as_bytes(), Path::new("b.ply")).is_err());
        let int_x = "ply\nformat ascii 1.0\nelement vertex 0\nproperty int x\nproperty float y\nproperty float z\nproperty int label\nend_header\n";
        assert!(read_cloud(int_x.as_bytes(), Path::new("b.ply")).is_err());
        let float_label = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nproperty float label\nend_header\n";
        assert!(read_cloud(float_label.as_bytes(), Path::new("b.ply")).is_err());
    }
}
