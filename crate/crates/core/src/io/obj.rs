use std::fmt::Write;
use std::path::Path;

use super::{format_error, read_text, write_bytes};
use crate::error::{Position, Result};
use crate::geometry::TriangleMesh;

/// Reads `v` and `f` records. Polygons are fanned into triangles; `vt`, `vn`,
/// groups and materials are ignored. Indices are 1-based; negative indices
/// count back from the latest vertex.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| format_error(path, Position::Line(line_no), msg);
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let vals = tok
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| err(format!("cannot parse coordinate {t:?}"))))
                    .collect::<Result<Vec<f64>>>()?;
                if vals.len() != 3 || vals.iter().any(|v| !v.is_finite()) {
                    return Err(err("vertex needs three finite coordinates".into()));
                }
                vertices.push([vals[0], vals[1], vals[2]]);
            }
            Some("f") => {
                let idx = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let k: i64 = head.parse().map_err(|_| err(format!("cannot parse index {t:?}")))?;
                        let n = vertices.len() as i64;
                        let resolved = if k > 0 { k - 1 } else { n + k };
                        if k == 0 || resolved < 0 || resolved >= n {
                            return Err(err(format!("vertex index {k} out of range (have {n} vertices)")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<Vec<usize>>>()?;
                if idx.len() < 3 {
                    return Err(err(format!("face needs at least 3 vertices, found {}", idx.len())));
                }
                for w in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    parse_obj(&read_text(path)?, path)
}

pub fn write_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let mut out = String::with_capacity(mesh.vertices.len() * 48 + mesh.triangles.len() * 24);
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2]).expect("string write");
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).expect("string write");
    }
    write_bytes(path.as_ref(), out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn p() -> &'static Path {
        Path::new("m.obj")
    }

    #[test]
    fn single_triangle() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", p()).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn quad_is_fanned_and_extras_ignored() {
        let text = "# quad\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\ng q\nf 1/1/1 2/2/1 3//1 4\n";
        let m = parse_obj(text, p()).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        let neg = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n", p()).unwrap();
        assert_eq!(neg.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn bad_indices_report_line() {
        for text in ["v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n"] {
            match parse_obj(text, p()) {
                Err(Error::Format(e)) => assert_eq!(e.position, Position::Line(4)),
                other => panic!("{other:?}"),
            }
        }
        assert!(parse_obj("v 0 0\n", p()).is_err());
    }

    #[test]
    fn icosphere_round_trip() {
        let m = TriangleMesh::icosphere(0.5, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.obj");
        write_obj(&path, &m).unwrap();
        assert_eq!(read_obj(&path).unwrap(), m);
    }
}
