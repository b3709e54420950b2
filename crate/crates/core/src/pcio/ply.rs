//! PLY reader/writer for vertex positions.
//!
//! Reads ASCII and binary little-endian files whose vertex element carries
//! `x`, `y`, `z` as `float` or `double`. Other properties and elements are
//! skipped. The writer always emits `double` positions.

use super::RawPointCloud;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
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

    fn read_le(self, b: &[u8]) -> f64 {
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
    header_line: usize,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
    body_line: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();

    loop {
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return Err(Error::parse_byte(
                offset as u64,
                "header is not terminated by end_header",
            ));
        };
        line_no += 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::parse_line(line_no, "header line is not valid UTF-8"))?
            .trim_end_matches('\r');
        offset += end + 1;

        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or("");
        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(Error::parse_line(1, "missing 'ply' magic line"));
            }
            continue;
        }
        match keyword {
            "" | "comment" | "obj_info" => {}
            "format" => {
                let kind = words.next().unwrap_or("");
                encoding = Some(match kind {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => {
                        return Err(Error::parse_line(
                            line_no,
                            format!("unsupported PLY format '{other}'"),
                        ))
                    }
                });
            }
            "element" => {
                let name = words
                    .next()
                    .ok_or_else(|| Error::parse_line(line_no, "element without a name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::parse_line(line_no, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    header_line: line_no,
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse_line(line_no, "property before any element"))?;
                let ty = words.next().unwrap_or("");
                let prop = if ty == "list" {
                    let count = words.next().and_then(Scalar::parse);
                    let item = words.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) => Property::List { count, item },
                        _ => {
                            return Err(Error::parse_line(
                                line_no,
                                "unsupported list property types",
                            ))
                        }
                    }
                } else {
                    let ty = Scalar::parse(ty).ok_or_else(|| {
                        Error::parse_line(line_no, format!("unsupported property type '{ty}'"))
                    })?;
                    let name = words
                        .next()
                        .ok_or_else(|| Error::parse_line(line_no, "property without a name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                element.properties.push(prop);
            }
            "end_header" => break,
            other => {
                return Err(Error::parse_line(
                    line_no,
                    format!("unexpected header keyword '{other}'"),
                ))
            }
        }
    }

    let encoding =
        encoding.ok_or_else(|| Error::parse_line(line_no, "header has no format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
        body_line: line_no + 1,
    })
}

/// Positions of x, y, z within the vertex element's property list.
fn position_slots(element: &Element) -> Result<[usize; 3]> {
    let mut slots = [usize::MAX; 3];
    for (i, prop) in element.properties.iter().enumerate() {
        if let Property::Scalar { name, ty } = prop {
            let axis = match name.as_str() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => continue,
            };
            if !matches!(ty, Scalar::F32 | Scalar::F64) {
                return Err(Error::parse_line(
                    element.header_line,
                    format!("vertex property '{name}' must be float or double, found {ty:?}"),
                ));
            }
            slots[axis] = i;
        }
    }
    if let Some(axis) = slots.iter().position(|&s| s == usize::MAX) {
        return Err(Error::parse_line(
            element.header_line,
            format!("vertex element lacks property '{}'", ["x", "y", "z"][axis]),
        ));
    }
    Ok(slots)
}

pub fn read_ply(bytes: &[u8]) -> Result<RawPointCloud> {
    let header = parse_header(bytes)?;
    let vertex_index = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::parse_line(header.body_line - 1, "no vertex element"))?;
    let slots = position_slots(&header.elements[vertex_index])?;
    let body = &bytes[header.body_offset..];
    match header.encoding {
        PlyEncoding::Ascii => read_ascii_body(body, &header, vertex_index, slots),
        PlyEncoding::BinaryLittleEndian => read_binary_body(body, &header, vertex_index, slots),
    }
}

fn read_ascii_body(
    body: &[u8],
    header: &Header,
    vertex_index: usize,
    slots: [usize; 3],
) -> Result<RawPointCloud> {
    let text = std::str::from_utf8(body).map_err(|e| {
        Error::parse_byte(
            (header.body_offset + e.valid_up_to()) as u64,
            "invalid UTF-8 in ASCII body",
        )
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (header.body_line + i, l));
    let mut points = Vec::new();

    for (ei, element) in header.elements.iter().enumerate().take(vertex_index + 1) {
        let is_vertex = ei == vertex_index;
        if is_vertex {
            points.reserve(element.count);
        }
        for seen in 0..element.count {
            let (line_no, line) = lines.next().ok_or_else(|| {
                Error::parse_line(
                    header.body_line + text.lines().count(),
                    format!(
                        "element count mismatch: header declares {} '{}' entries, file has {seen}",
                        element.count, element.name
                    ),
                )
            })?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let mut cursor = 0usize;
            let mut values = [0.0f64; 3];
            for (pi, prop) in element.properties.iter().enumerate() {
                let mut take = || -> Result<&str> {
                    let t = tokens.get(cursor).copied().ok_or_else(|| {
                        Error::parse_line(line_no, format!("too few values for '{}'", element.name))
                    })?;
                    cursor += 1;
                    Ok(t)
                };
                match prop {
                    Property::Scalar { .. } => {
                        let tok = take()?;
                        if is_vertex {
                            if let Some(axis) = slots.iter().position(|&s| s == pi) {
                                values[axis] = tok.parse::<f64>().map_err(|_| {
                                    Error::parse_line(line_no, format!("'{tok}' is not a number"))
                                })?;
                            }
                        }
                    }
                    Property::List { .. } => {
                        let tok = take()?;
                        let n = tok.parse::<usize>().map_err(|_| {
                            Error::parse_line(line_no, format!("bad list length '{tok}'"))
                        })?;
                        for _ in 0..n {
                            take()?;
                        }
                    }
                }
            }
            if cursor != tokens.len() {
                return Err(Error::parse_line(
                    line_no,
                    format!(
                        "expected {cursor} values for '{}', found {}",
                        element.name,
                        tokens.len()
                    ),
                ));
            }
            if is_vertex {
                points.push(values);
            }
        }
    }
    Ok(RawPointCloud::new(points))
}

fn read_binary_body(
    body: &[u8],
    header: &Header,
    vertex_index: usize,
    slots: [usize; 3],
) -> Result<RawPointCloud> {
    let mut pos = 0usize;
    let base = header.body_offset as u64;
    let mut points = Vec::new();

    let take = |n: usize, what: &str, pos: &mut usize| take_bytes(body, base, pos, n, what);

    for (ei, element) in header.elements.iter().enumerate().take(vertex_index + 1) {
        let is_vertex = ei == vertex_index;
        if is_vertex {
            points.reserve(element.count.min(body.len()));
        }
        for _ in 0..element.count {
            let mut values = [0.0f64; 3];
            for (pi, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let raw = take(ty.size(), &element.name, &mut pos)?;
                        if is_vertex {
                            if let Some(axis) = slots.iter().position(|&s| s == pi) {
                                values[axis] = ty.read_le(raw);
                            }
                        }
                    }
                    Property::List { count, item } => {
                        let at = pos;
                        let n = count.read_le(take(count.size(), &element.name, &mut pos)?);
                        if n < 0.0 {
                            return Err(Error::parse_byte(
                                base + at as u64,
                                "negative list length",
                            ));
                        }
                        take(n as usize * item.size(), &element.name, &mut pos)?;
                    }
                }
            }
            if is_vertex {
                points.push(values);
            }
        }
    }
    Ok(RawPointCloud::new(points))
}

fn take_bytes<'a>(
    body: &'a [u8],
    base: u64,
    pos: &mut usize,
    n: usize,
    what: &str,
) -> Result<&'a [u8]> {
    if *pos + n > body.len() {
        return Err(Error::parse_byte(
            base + *pos as u64,
            format!("unexpected end of file while reading {what}"),
        ));
    }
    let s = &body[*pos..*pos + n];
    *pos += n;
    Ok(s)
}

pub fn write_ply(cloud: &RawPointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\ncomment written by pvc\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    )
    .into_bytes();
    match encoding {
        PlyEncoding::Ascii => {
            use std::fmt::Write;
            let mut s = String::with_capacity(cloud.len() * 24);
            for p in &cloud.points {
                let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
            }
            out.extend_from_slice(s.as_bytes());
        }
        PlyEncoding::BinaryLittleEndian => {
            out.reserve(cloud.len() * 24);
            for p in &cloud.points {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Location;

    #[test]
    fn ascii_three_vertices_in_order() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nend_header\n0 0 0 255\n1 2 3 0\n-1.5 2 4 7\n";
        let pc = read_ply(src).unwrap();
        assert_eq!(
            pc.points,
            vec![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [-1.5, 2.0, 4.0]]
        );
    }

    #[test]
    fn skips_leading_elements_and_lists() {
        let src = b"ply\nformat ascii 1.0\ncomment x\nelement camera 1\nproperty list uchar int ids\nelement vertex 1\nproperty double z\nproperty double y\nproperty double x\nend_header\n3 1 2 3\n1 2 3\n";
        let pc = read_ply(src).unwrap();
        assert_eq!(pc.points, vec![[3.0, 2.0, 1.0]]);
    }

    #[test]
    fn binary_with_extra_properties() {
        let mut src = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty uchar flag\nproperty float y\nproperty float z\nend_header\n".to_vec();
        for (i, p) in [[1.0f32, 2.0, 3.0], [4.5, -5.0, 6.0]].iter().enumerate() {
            src.extend_from_slice(&p[0].to_le_bytes());
            src.push(i as u8);
            src.extend_from_slice(&p[1].to_le_bytes());
            src.extend_from_slice(&p[2].to_le_bytes());
        }
        let pc = read_ply(&src).unwrap();
        assert_eq!(pc.points, vec![[1.0, 2.0, 3.0], [4.5, -5.0, 6.0]]);
    }

    #[test]
    fn count_mismatch_names_line() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 1 1\n";
        match read_ply(src) {
            Err(Error::Parse {
                location: Location::Line(_),
                message,
            }) => {
                assert!(message.contains("count mismatch"), "{message}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_names_byte_offset() {
        let mut src = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        let header_len = src.len() as u64;
        src.extend_from_slice(&[0u8; 16]);
        match read_ply(&src) {
            Err(Error::Parse {
                location: Location::Byte(b),
                ..
            }) => assert_eq!(b, header_len + 16),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unsupported_types_and_formats() {
        let int_pos = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\nproperty int y\nproperty int z\nend_header\n1 2 3\n";
        assert!(matches!(read_ply(int_pos), Err(Error::Parse { .. })));
        let be = b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(
            read_ply(be),
            Err(Error::Parse {
                location: Location::Line(2),
                ..
            })
        ));
        let bogus = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty quad x\nend_header\n";
        assert!(matches!(
            read_ply(bogus),
            Err(Error::Parse {
                location: Location::Line(4),
                ..
            })
        ));
        assert!(read_ply(b"plx\n").is_err());
        assert!(read_ply(b"ply\nformat ascii 1.0\n").is_err());
    }

    #[test]
    fn ascii_row_with_extra_tokens_is_rejected() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3 4\n";
        assert!(matches!(
            read_ply(src),
            Err(Error::Parse {
                location: Location::Line(8),
                ..
            })
        ));
    }
}
