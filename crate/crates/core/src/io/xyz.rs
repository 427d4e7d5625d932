use std::fmt::Write;
use std::path::Path;

use super::{format_error, read_text, write_bytes};
use crate::error::{Position, Result};
use crate::geometry::{pointcloud::norm, Point3, PointCloud};

/// Parses `x y z` or `x y z nx ny nz` lines. `#` starts a comment. All data
/// lines must have the same column count; normals must be unit to 1e-6.
pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut columns = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| format_error(path, Position::Line(line_no), msg);
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("cannot parse number {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(err(format!("expected 3 or 6 columns, found {}", vals.len())));
        }
        match columns {
            None => columns = Some(vals.len()),
            Some(c) if c != vals.len() => {
                return Err(err(format!("expected {c} columns like earlier lines, found {}", vals.len())))
            }
            _ => {}
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        positions.push([vals[0], vals[1], vals[2]]);
        if vals.len() == 6 {
            let n: Point3 = [vals[3], vals[4], vals[5]];
            if (norm(&n) - 1.0).abs() > 1e-6 {
                return Err(err(format!("normal has length {}, expected 1", norm(&n))));
            }
            normals.push(n);
        }
    }
    if positions.is_empty() {
        let lines = text.lines().count().max(1);
        return Err(format_error(path, Position::Line(lines), "file contains no points"));
    }
    let normals = (columns == Some(6)).then_some(normals);
    PointCloud::new(positions, normals)
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    parse_xyz(&read_text(path)?, path)
}

/// One point per line with the shortest exactly round-tripping decimal form.
pub fn write_xyz(path: impl AsRef<Path>, pc: &PointCloud) -> Result<()> {
    let mut out = String::with_capacity(pc.len() * 64);
    for (i, p) in pc.positions.iter().enumerate() {
        write!(out, "{} {} {}", p[0], p[1], p[2]).expect("string write");
        if let Some(ns) = &pc.normals {
            let n = ns[i];
            write!(out, " {} {} {}", n[0], n[1], n[2]).expect("string write");
        }
        out.push('\n');
    }
    write_bytes(path.as_ref(), out.as_bytes())
}
