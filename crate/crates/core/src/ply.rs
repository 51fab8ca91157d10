//! Minimal PLY reader/writer: ASCII and binary little-endian, scalar and
//! list properties. Values are widened to `f64`, which is exact for every
//! integer type PLY defines.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn name(self) -> &'static str {
        match self {
            Self::I8 => "char",
            Self::U8 => "uchar",
            Self::I16 => "short",
            Self::U16 => "ushort",
            Self::I32 => "int",
            Self::U32 => "uint",
            Self::F32 => "float",
            Self::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => f64::from(b[0] as i8),
            Self::U8 => f64::from(b[0]),
            Self::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Self::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Self::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            Self::I8 => out.push(v as i8 as u8),
            Self::U8 => out.push(v as u8),
            Self::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            Self::U16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            Self::I32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            Self::U32 => out.extend_from_slice(&(v as u32).to_le_bytes()),
            Self::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Self::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

impl Value {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(v) => Some(*v),
            Value::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[f64]> {
        match self {
            Value::List(v) => Some(v),
            Value::Scalar(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub properties: Vec<Property>,
    pub rows: Vec<Vec<Value>>,
}

impl Element {
    pub fn property_index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ply {
    pub encoding: Encoding,
    pub elements: Vec<Element>,
}

impl Ply {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::parse(&bytes, path)
    }

    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut cursor = std::io::Cursor::new(bytes);
        let mut line = String::new();
        let mut lineno = 0usize;
        let mut next_line = |cursor: &mut std::io::Cursor<&[u8]>, line: &mut String| -> Result<bool> {
            line.clear();
            lineno += 1;
            Ok(cursor.read_line(line)? > 0)
        };

        if !next_line(&mut cursor, &mut line)? || line.trim() != "ply" {
            return Err(Error::parse(path, 1, "missing `ply` magic"));
        }
        let mut encoding = None;
        let mut headers: Vec<(String, usize, Vec<Property>)> = Vec::new();
        let mut header_line = 1;
        loop {
            if !next_line(&mut cursor, &mut line)? {
                return Err(Error::parse(path, header_line, "header not terminated"));
            }
            header_line += 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["end_header"] => break,
                ["comment", ..] | ["obj_info", ..] | [] => {}
                ["format", fmt, _version] => {
                    encoding = Some(match *fmt {
                        "ascii" => Encoding::Ascii,
                        "binary_little_endian" => Encoding::BinaryLittleEndian,
                        other => {
                            return Err(Error::parse(
                                path,
                                header_line,
                                format!("unsupported PLY format `{other}`"),
                            ))
                        }
                    })
                }
                ["element", name, count] => {
                    let count = count.parse().map_err(|_| {
                        Error::parse(path, header_line, "bad element count")
                    })?;
                    headers.push((name.to_string(), count, Vec::new()));
                }
                ["property", "list", ct, it, name] => {
                    let (Some(count), Some(item)) = (ScalarType::parse(ct), ScalarType::parse(it))
                    else {
                        return Err(Error::parse(path, header_line, "unknown list property type"));
                    };
                    let Some(el) = headers.last_mut() else {
                        return Err(Error::parse(path, header_line, "property before element"));
                    };
                    el.2.push(Property {
                        name: name.to_string(),
                        kind: PropertyKind::List { count, item },
                    });
                }
                ["property", ty, name] => {
                    let Some(ty) = ScalarType::parse(ty) else {
                        return Err(Error::parse(path, header_line, format!("unknown type `{ty}`")));
                    };
                    let Some(el) = headers.last_mut() else {
                        return Err(Error::parse(path, header_line, "property before element"));
                    };
                    el.2.push(Property {
                        name: name.to_string(),
                        kind: PropertyKind::Scalar(ty),
                    });
                }
                _ => {
                    return Err(Error::parse(
                        path,
                        header_line,
                        format!("unrecognised header line `{}`", line.trim()),
                    ))
                }
            }
        }
        let encoding =
            encoding.ok_or_else(|| Error::parse(path, header_line, "missing format line"))?;

        let mut elements = Vec::with_capacity(headers.len());
        match encoding {
            Encoding::Ascii => {
                let mut rest = String::new();
                cursor.read_to_string(&mut rest)?;
                let mut lines = rest.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
                for (name, count, properties) in headers {
                    let mut rows = Vec::with_capacity(count);
                    for _ in 0..count {
                        let (idx, l) = lines.next().ok_or_else(|| {
                            Error::parse(path, header_line, format!("element `{name}` truncated"))
                        })?;
                        let at = header_line + idx + 1;
                        let mut toks = l.split_whitespace();
                        let mut num = || -> Result<f64> {
                            toks.next()
                                .ok_or_else(|| Error::parse(path, at, "row too short"))?
                                .parse::<f64>()
                                .map_err(|_| Error::parse(path, at, "bad number"))
                        };
                        let mut row = Vec::with_capacity(properties.len());
                        for p in &properties {
                            row.push(match p.kind {
                                PropertyKind::Scalar(_) => Value::Scalar(num()?),
                                PropertyKind::List { .. } => {
                                    let n = num()? as usize;
                                    Value::List((0..n).map(|_| num()).collect::<Result<_>>()?)
                                }
                            });
                        }
                        rows.push(row);
                    }
                    elements.push(Element {
                        name,
                        properties,
                        rows,
                    });
                }
            }
            Encoding::BinaryLittleEndian => {
                let pos = cursor.position() as usize;
                let data = &bytes[pos..];
                let mut off = 0usize;
                let mut take = |ty: ScalarType| -> Result<f64> {
                    let sz = ty.size();
                    if off + sz > data.len() {
                        return Err(Error::parse(path, header_line, "binary payload truncated"));
                    }
                    let v = ty.decode(&data[off..off + sz]);
                    off += sz;
                    Ok(v)
                };
                for (name, count, properties) in headers {
                    let mut rows = Vec::with_capacity(count);
                    for _ in 0..count {
                        let mut row = Vec::with_capacity(properties.len());
                        for p in &properties {
                            row.push(match p.kind {
                                PropertyKind::Scalar(ty) => Value::Scalar(take(ty)?),
                                PropertyKind::List { count, item } => {
                                    let n = take(count)? as usize;
                                    Value::List((0..n).map(|_| take(item)).collect::<Result<_>>()?)
                                }
                            });
                        }
                        rows.push(row);
                    }
                    elements.push(Element {
                        name,
                        properties,
                        rows,
                    });
                }
            }
        }
        Ok(Ply { encoding, elements })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let fmt = match self.encoding {
            Encoding::Ascii => "ascii",
            Encoding::BinaryLittleEndian => "binary_little_endian",
        };
        writeln!(w, "ply\nformat {fmt} 1.0")?;
        for el in &self.elements {
            writeln!(w, "element {} {}", el.name, el.rows.len())?;
            for p in &el.properties {
                match p.kind {
                    PropertyKind::Scalar(t) => writeln!(w, "property {} {}", t.name(), p.name)?,
                    PropertyKind::List { count, item } => writeln!(
                        w,
                        "property list {} {} {}",
                        count.name(),
                        item.name(),
                        p.name
                    )?,
                }
            }
        }
        writeln!(w, "end_header")?;
        match self.encoding {
            Encoding::Ascii => {
                for el in &self.elements {
                    for row in &el.rows {
                        let mut first = true;
                        for v in row {
                            let vals: Vec<String> = match v {
                                Value::Scalar(x) => vec![format_ascii(*x)],
                                Value::List(xs) => std::iter::once(xs.len().to_string())
                                    .chain(xs.iter().map(|x| format_ascii(*x)))
                                    .collect(),
                            };
                            for s in vals {
                                if !first {
                                    w.write_all(b" ")?;
                                }
                                first = false;
                                w.write_all(s.as_bytes())?;
                            }
                        }
                        w.write_all(b"\n")?;
                    }
                }
            }
            Encoding::BinaryLittleEndian => {
                let mut buf = Vec::new();
                for el in &self.elements {
                    for row in &el.rows {
                        for (p, v) in el.properties.iter().zip(row) {
                            match (&p.kind, v) {
                                (PropertyKind::Scalar(t), Value::Scalar(x)) => t.encode(*x, &mut buf),
                                (PropertyKind::List { count, item }, Value::List(xs)) => {
                                    count.encode(xs.len() as f64, &mut buf);
                                    for x in xs {
                                        item.encode(*x, &mut buf);
                                    }
                                }
                                _ => {
                                    return Err(Error::invalid(format!(
                                        "value shape does not match property `{}`",
                                        p.name
                                    )))
                                }
                            }
                        }
                    }
                }
                w.write_all(&buf)?;
            }
        }
        Ok(())
    }
}

// `{:?}` on f64 prints the shortest string that round-trips exactly.
fn format_ascii(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(encoding: Encoding) -> Ply {
        Ply {
            encoding,
            elements: vec![
                Element {
                    name: "vertex".into(),
                    properties: vec![
                        Property { name: "x".into(), kind: PropertyKind::Scalar(ScalarType::F64) },
                        Property { name: "label".into(), kind: PropertyKind::Scalar(ScalarType::I32) },
                    ],
                    rows: vec![
                        vec![Value::Scalar(0.1), Value::Scalar(2.0)],
                        vec![Value::Scalar(-1.0 / 3.0), Value::Scalar(-7.0)],
                    ],
                },
                Element {
                    name: "face".into(),
                    properties: vec![Property {
                        name: "vertex_indices".into(),
                        kind: PropertyKind::List { count: ScalarType::U8, item: ScalarType::I32 },
                    }],
                    rows: vec![vec![Value::List(vec![0.0, 1.0, 0.0])]],
                },
            ],
        }
    }

    #[test]
    fn round_trips_both_encodings() {
        for enc in [Encoding::Ascii, Encoding::BinaryLittleEndian] {
            let ply = sample(enc);
            let mut buf = Vec::new();
            ply.write(&mut buf).unwrap();
            let back = Ply::parse(&buf, Path::new("mem.ply")).unwrap();
            assert_eq!(back, ply);
        }
    }

    #[test]
    fn rejects_truncated_body() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nend_header\n1.0\n";
        assert!(matches!(
            Ply::parse(text, Path::new("t.ply")),
            Err(Error::Parse { .. })
        ));
    }
}
