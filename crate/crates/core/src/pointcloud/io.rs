use std::fmt::Write as _;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::ply::{Element, Encoding, Ply, Property, PropertyKind, ScalarType, Value};

use super::PointCloud;

pub use crate::ply::Encoding as PlyEncoding;

/// Writes `x y z` as doubles plus an optional `int label` vertex property.
pub fn write_ply(pc: &PointCloud, path: &Path, encoding: Encoding) -> Result<()> {
    let mut properties = ["x", "y", "z"]
        .iter()
        .map(|n| Property {
            name: n.to_string(),
            kind: PropertyKind::Scalar(ScalarType::F64),
        })
        .collect::<Vec<_>>();
    if pc.labels.is_some() {
        properties.push(Property {
            name: "label".into(),
            kind: PropertyKind::Scalar(ScalarType::I32),
        });
    }
    let rows = pc
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = vec![Value::Scalar(p.x), Value::Scalar(p.y), Value::Scalar(p.z)];
            if let Some(l) = pc.label(i) {
                row.push(Value::Scalar(f64::from(l)));
            }
            row
        })
        .collect();
    let ply = Ply {
        encoding,
        elements: vec![Element {
            name: "vertex".into(),
            properties,
            rows,
        }],
    };
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    ply.write(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let ply = Ply::read_file(path)?;
    let vertex = ply
        .element("vertex")
        .ok_or_else(|| Error::parse(path, 0, "no `vertex` element"))?;
    let idx = |name: &str| {
        vertex
            .property_index(name)
            .ok_or_else(|| Error::parse(path, 0, format!("vertex has no `{name}` property")))
    };
    let (xi, yi, zi) = (idx("x")?, idx("y")?, idx("z")?);
    let li = vertex.property_index("label");
    let scalar = |row: &[Value], i: usize| {
        row[i]
            .as_scalar()
            .ok_or_else(|| Error::parse(path, 0, "list where scalar expected"))
    };
    let mut points = Vec::with_capacity(vertex.rows.len());
    let mut labels = li.map(|_| Vec::with_capacity(vertex.rows.len()));
    for row in &vertex.rows {
        points.push(Vec3::new(scalar(row, xi)?, scalar(row, yi)?, scalar(row, zi)?));
        if let (Some(li), Some(ls)) = (li, labels.as_mut()) {
            ls.push(scalar(row, li)? as u32);
        }
    }
    let pc = PointCloud { points, labels };
    pc.validate()?;
    Ok(pc)
}

/// One point per line: `x y z` or `x y z label`.
pub fn write_xyz(pc: &PointCloud, path: &Path) -> Result<()> {
    let mut s = String::with_capacity(pc.len() * 64);
    for (i, p) in pc.points.iter().enumerate() {
        match pc.label(i) {
            Some(l) => writeln!(s, "{:?} {:?} {:?} {l}", p.x, p.y, p.z),
            None => writeln!(s, "{:?} {:?} {:?}", p.x, p.y, p.z),
        }
        .expect("writing to a String cannot fail");
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    let mut labels: Option<Vec<u32>> = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, n + 1, format!("bad number `{s}`")))
        };
        match toks.len() {
            3 | 4 => {
                points.push(Vec3::new(num(toks[0])?, num(toks[1])?, num(toks[2])?));
                let has_label = toks.len() == 4;
                if points.len() == 1 && has_label {
                    labels = Some(Vec::new());
                }
                match (&mut labels, has_label) {
                    (Some(ls), true) => ls.push(
                        toks[3]
                            .parse()
                            .map_err(|_| Error::parse(path, n + 1, "bad label"))?,
                    ),
                    (None, false) => {}
                    _ => return Err(Error::parse(path, n + 1, "inconsistent column count")),
                }
            }
            k => return Err(Error::parse(path, n + 1, format!("expected 3 or 4 columns, got {k}"))),
        }
    }
    let pc = PointCloud { points, labels };
    pc.validate()?;
    Ok(pc)
}
