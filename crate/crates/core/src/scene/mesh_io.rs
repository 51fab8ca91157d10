//! OFF, PLY (ASCII / binary little-endian) and OBJ mesh readers. Polygons
//! with more than three vertices are fan-triangulated.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::ply::{Element, Encoding, Ply, Property, PropertyKind, ScalarType, Value};

use super::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Off,
    Ply,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(Self::Off),
            "ply" => Some(Self::Ply),
            "obj" => Some(Self::Obj),
            _ => None,
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(&std::fs::read_to_string(path)?, path)?,
        MeshFormat::Ply => ply_faces(&Ply::read_file(path)?, path)?,
        MeshFormat::Obj => parse_obj(&std::fs::read_to_string(path)?, path)?,
    };
    let mut triangles = Vec::with_capacity(faces.len());
    for (f, face) in faces.iter().enumerate() {
        if face.len() < 3 {
            return Err(Error::parse(path, 0, format!("face {f} has fewer than 3 vertices")));
        }
        for k in 1..face.len() - 1 {
            triangles.push([face[0], face[k], face[k + 1]]);
        }
    }
    if triangles.is_empty() {
        return Err(Error::EmptyMesh { dropped: 0 });
    }
    TriangleMesh::new(vertices, triangles)
}

type Faces = (Vec<Vec3>, Vec<Vec<usize>>);

fn parse_off(text: &str, path: &Path) -> Result<Faces> {
    // Strip comments, keep line numbers for messages.
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty OFF file"))?;
    // The counts may share the magic line ("OFF 8 12 0").
    let counts_line = match first.strip_prefix("OFF") {
        Some(rest) if !rest.trim().is_empty() => (n, rest.trim()),
        Some(_) => lines
            .next()
            .ok_or_else(|| Error::parse(path, n, "missing OFF counts"))?,
        None => return Err(Error::parse(path, n, "missing OFF magic")),
    };
    let counts: Vec<usize> = counts_line
        .1
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(path, counts_line.0, "bad OFF counts"))?;
    let [nv, nf, ..] = counts[..] else {
        return Err(Error::parse(path, counts_line.0, "expected vertex and face counts"));
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, "unexpected end of vertex list"))?;
        let c: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, n, "bad vertex coordinate"))?;
        if c.len() != 3 {
            return Err(Error::parse(path, n, "vertex needs 3 coordinates"));
        }
        vertices.push(Vec3::new(c[0], c[1], c[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, "unexpected end of face list"))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, n, "bad face index"))?;
        let Some((&k, rest)) = ids.split_first() else {
            return Err(Error::parse(path, n, "empty face line"));
        };
        if rest.len() < k {
            return Err(Error::parse(path, n, "face shorter than its vertex count"));
        }
        faces.push(rest[..k].to_vec());
    }
    Ok((vertices, faces))
}

fn ply_faces(ply: &Ply, path: &Path) -> Result<Faces> {
    let vertex = ply
        .element("vertex")
        .ok_or_else(|| Error::parse(path, 0, "no vertex element"))?;
    let idx = |n: &str| {
        vertex
            .property_index(n)
            .ok_or_else(|| Error::parse(path, 0, format!("vertex has no `{n}`")))
    };
    let (xi, yi, zi) = (idx("x")?, idx("y")?, idx("z")?);
    let s = |v: &Value| v.as_scalar().ok_or_else(|| Error::parse(path, 0, "list coordinate"));
    let vertices = vertex
        .rows
        .iter()
        .map(|r| Ok(Vec3::new(s(&r[xi])?, s(&r[yi])?, s(&r[zi])?)))
        .collect::<Result<Vec<_>>>()?;
    let faces = match ply.element("face") {
        None => Vec::new(),
        Some(face) => {
            let fi = face
                .property_index("vertex_indices")
                .or_else(|| face.property_index("vertex_index"))
                .ok_or_else(|| Error::parse(path, 0, "face has no vertex_indices"))?;
            face.rows
                .iter()
                .map(|r| {
                    r[fi].as_list()
                        .map(|l| l.iter().map(|&i| i as usize).collect())
                        .ok_or_else(|| Error::parse(path, 0, "vertex_indices is not a list"))
                })
                .collect::<Result<_>>()?
        }
    };
    Ok((vertices, faces))
}

fn parse_obj(text: &str, path: &Path) -> Result<Faces> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<f64> = toks
                    .take(3)
                    .map(|t| t.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(path, n, "bad vertex"))?;
                if c.len() != 3 {
                    return Err(Error::parse(path, n, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let face = toks
                    .map(|t| {
                        let idx: i64 = t
                            .split('/')
                            .next()
                            .unwrap_or("")
                            .parse()
                            .map_err(|_| Error::parse(path, n, "bad face index"))?;
                        // 1-based; negative indices count from the end
                        let resolved = if idx < 0 { vertices.len() as i64 + idx } else { idx - 1 };
                        usize::try_from(resolved)
                            .map_err(|_| Error::parse(path, n, "face index out of range"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn write_off(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut s = format!("OFF\n{} {} 0\n", mesh.vertices().len(), mesh.triangles().len());
    for v in mesh.vertices() {
        writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_ply_mesh(mesh: &TriangleMesh, path: &Path, encoding: Encoding) -> Result<()> {
    let scalar = |n: &str| Property {
        name: n.into(),
        kind: PropertyKind::Scalar(ScalarType::F64),
    };
    let ply = Ply {
        encoding,
        elements: vec![
            Element {
                name: "vertex".into(),
                properties: vec![scalar("x"), scalar("y"), scalar("z")],
                rows: mesh
                    .vertices()
                    .iter()
                    .map(|v| vec![Value::Scalar(v.x), Value::Scalar(v.y), Value::Scalar(v.z)])
                    .collect(),
            },
            Element {
                name: "face".into(),
                properties: vec![Property {
                    name: "vertex_indices".into(),
                    kind: PropertyKind::List {
                        count: ScalarType::U8,
                        item: ScalarType::I32,
                    },
                }],
                rows: mesh
                    .triangles()
                    .iter()
                    .map(|t| vec![Value::List(t.iter().map(|&i| i as f64).collect())])
                    .collect(),
            },
        ],
    };
    let mut buf = Vec::new();
    ply.write(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::shapes;

    const CUBE_OFF: &str = "OFF
# unit cube
8 12 0
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
3 0 2 1
3 0 3 2
3 4 5 6
3 4 6 7
3 0 1 5
3 0 5 4
3 1 2 6
3 1 6 5
3 2 3 7
3 2 7 6
3 3 0 4
3 3 4 7
";

    /// Cross-product area of each triangle, summed independently of the mesh type.
    fn oracle_area(text: &str) -> f64 {
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        let v: Vec<[f64; 3]> = lines[2..10]
            .iter()
            .map(|l| {
                let c: Vec<f64> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
                [c[0], c[1], c[2]]
            })
            .collect();
        lines[10..]
            .iter()
            .map(|l| {
                let i: Vec<usize> = l.split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect();
                let (a, b, c) = (v[i[0]], v[i[1]], v[i[2]]);
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let x = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
                0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
            })
            .sum()
    }

    #[test]
    fn unit_cube_off() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.off");
        std::fs::write(&p, CUBE_OFF).unwrap();
        let mesh = load_mesh(&p, MeshFormat::Off).unwrap();
        assert_eq!(mesh.triangles().len(), 12);
        assert!((oracle_area(CUBE_OFF) - 6.0).abs() < 1e-12);
        assert!((mesh.surface_area() - oracle_area(CUBE_OFF)).abs() < 1e-12);
    }

    #[test]
    fn empty_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.off");
        std::fs::write(&p, "OFF\n3 0 0\n0 0 0\n1 0 0\n0 1 0\n").unwrap();
        assert!(matches!(load_mesh(&p, MeshFormat::Off), Err(Error::EmptyMesh { .. })));
        std::fs::write(&p, "OFF\n3 1 0\n0 0 0\n1 0 0\n").unwrap();
        assert!(matches!(load_mesh(&p, MeshFormat::Off), Err(Error::Parse { .. })));
        std::fs::write(&p, "NOPE\n").unwrap();
        assert!(matches!(load_mesh(&p, MeshFormat::Off), Err(Error::Parse { .. })));
    }

    #[test]
    fn formats_agree() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::car();
        let off = dir.path().join("m.off");
        write_off(&mesh, &off).unwrap();
        let ply_a = dir.path().join("a.ply");
        write_ply_mesh(&mesh, &ply_a, Encoding::Ascii).unwrap();
        let ply_b = dir.path().join("b.ply");
        write_ply_mesh(&mesh, &ply_b, Encoding::BinaryLittleEndian).unwrap();
        let obj = dir.path().join("m.obj");
        let mut s = String::new();
        for v in mesh.vertices() {
            writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
        }
        for t in mesh.triangles() {
            writeln!(s, "f {}/1 {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
        }
        std::fs::write(&obj, s).unwrap();
        for (p, f) in [(&off, MeshFormat::Off), (&ply_a, MeshFormat::Ply), (&ply_b, MeshFormat::Ply), (&obj, MeshFormat::Obj)] {
            assert_eq!(load_mesh(p, f).unwrap(), mesh, "{p:?}");
            assert_eq!(MeshFormat::from_path(p), Some(f));
        }
    }

    #[test]
    fn quads_are_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("quad.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        let m = load_mesh(&p, MeshFormat::Obj).unwrap();
        assert_eq!(m.triangles().len(), 2);
        assert!((m.surface_area() - 1.0).abs() < 1e-15);
    }
}
