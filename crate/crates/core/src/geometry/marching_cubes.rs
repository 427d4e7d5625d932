//! Table-driven marching cubes with shared-edge vertex welding.
//!
//! Ambiguous faces are resolved by the table alone (no asymptotic decider).

use std::collections::HashMap;

use super::grid::ScalarGrid;
use super::mc_tables::TRI_TABLE;
use super::mesh::{cross, TriangleMesh};
use super::pointcloud::Point3;
use crate::error::Result;

/// Cube corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs of the twelve cube edges, in table order.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum VertexKey {
    /// Iso-crossing strictly inside a lattice edge: (lower corner, axis).
    Edge(usize, u8),
    /// Crossing exactly at a lattice corner.
    Corner(usize),
}

/// Extracts the `iso` level set as a triangle mesh. Triangles are wound so
/// their normals point toward increasing field values. An iso value outside
/// the grid's range yields an empty mesh.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> Result<TriangleMesh> {
    let [nx, ny, nz] = grid.res;
    let (lo, hi) = grid.min_max();
    let mut mesh = TriangleMesh::default();
    if !(iso >= lo && iso <= hi) {
        return Ok(mesh);
    }
    let mut welded: HashMap<VertexKey, usize> = HashMap::new();
    let lattice = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;

    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            for k in 0..nz - 1 {
                let mut vals = [0.0; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    vals[c] = grid.get(i + off[0], j + off[1], k + off[2]);
                    if vals[c] < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut edge_vertex = [usize::MAX; 12];
                for tri in row.chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let mut idx = [0usize; 3];
                    for (slot, &e) in idx.iter_mut().zip(tri) {
                        let e = e as usize;
                        if edge_vertex[e] == usize::MAX {
                            let [ca, cb] = EDGES[e];
                            let (oa, ob) = (CORNERS[ca], CORNERS[cb]);
                            let pa = [i + oa[0], j + oa[1], k + oa[2]];
                            let pb = [i + ob[0], j + ob[1], k + ob[2]];
                            let (va, vb) = (vals[ca], vals[cb]);
                            let t = (iso - va) / (vb - va);
                            let key = if t <= 0.0 {
                                VertexKey::Corner(lattice(pa[0], pa[1], pa[2]))
                            } else if t >= 1.0 {
                                VertexKey::Corner(lattice(pb[0], pb[1], pb[2]))
                            } else {
                                let low = if pa <= pb { pa } else { pb };
                                let axis = (0..3).find(|&a| pa[a] != pb[a]).expect("edge") as u8;
                                VertexKey::Edge(lattice(low[0], low[1], low[2]), axis)
                            };
                            edge_vertex[e] = *welded.entry(key).or_insert_with(|| {
                                let a = grid.point(pa[0], pa[1], pa[2]);
                                let b = grid.point(pb[0], pb[1], pb[2]);
                                let t = t.clamp(0.0, 1.0);
                                mesh.vertices.push(std::array::from_fn(|d| a[d] + t * (b[d] - a[d])));
                                mesh.vertices.len() - 1
                            });
                        }
                        *slot = edge_vertex[e];
                    }
                    if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
                        continue;
                    }
                    // The table winds triangles toward the low side; flip them.
                    let tri_out = [idx[0], idx[2], idx[1]];
                    let fc = face_cross(&mesh.vertices, tri_out);
                    if fc.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    mesh.triangles.push(tri_out);
                }
            }
        }
    }
    Ok(mesh)
}

fn face_cross(v: &[Point3], t: [usize; 3]) -> Point3 {
    let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
    cross(
        &[b[0] - a[0], b[1] - a[1], b[2] - a[2]],
        &[c[0] - a[0], c[1] - a[1], c[2] - a[2]],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::Aabb;
    use crate::geometry::pointcloud::norm;

    fn sphere_grid(res: usize, r: f64) -> ScalarGrid {
        ScalarGrid::from_fn([res; 3], Aabb::UNIT, |p| norm(p) - r).unwrap()
    }

    #[test]
    fn sphere_vertices_near_surface() {
        let g = sphere_grid(64, 0.5);
        let cell = g.spacing()[0];
        for (iso, target) in [(0.0, 0.5), (0.1, 0.6)] {
            let m = marching_cubes(&g, iso).unwrap();
            assert!(!m.is_empty());
            for v in &m.vertices {
                assert!((norm(v) - target).abs() < 2.0 * cell);
            }
        }
    }

    #[test]
    fn sphere_mesh_is_closed() {
        for res in [16, 33, 64] {
            let m = marching_cubes(&sphere_grid(res, 0.55), 0.0).unwrap();
            assert!(m.is_closed(), "res {res}");
        }
    }

    #[test]
    fn normals_point_toward_increasing_field() {
        let m = marching_cubes(&sphere_grid(32, 0.5), 0.0).unwrap();
        for t in 0..m.triangles.len() {
            let c = m.corners(t);
            let centre: Point3 = std::array::from_fn(|i| (c[0][i] + c[1][i] + c[2][i]) / 3.0);
            let n = m.face_cross(t);
            assert!(n.iter().zip(&centre).map(|(a, b)| a * b).sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn no_degenerate_triangles() {
        let m = marching_cubes(&sphere_grid(21, 0.5), 0.0).unwrap();
        for t in 0..m.triangles.len() {
            assert!(m.area(t) > 0.0);
        }
    }

    #[test]
    fn exact_iso_on_lattice_stays_closed() {
        // Plane values hitting lattice corners exactly, wrapped into a box SDF.
        let g = ScalarGrid::from_fn([9; 3], Aabb::UNIT, |p| {
            p.iter().fold(0.0f64, |m, v| m.max(v.abs())) - 0.5
        })
        .unwrap();
        let m = marching_cubes(&g, 0.0).unwrap();
        assert!(m.is_closed());
        for t in 0..m.triangles.len() {
            assert!(m.area(t) > 0.0);
        }
    }

    #[test]
    fn out_of_range_iso_is_empty() {
        let g = ScalarGrid::from_fn([8; 3], Aabb::UNIT, |_| 1.0).unwrap();
        assert!(marching_cubes(&g, 0.0).unwrap().is_empty());
        assert!(marching_cubes(&sphere_grid(8, 0.5), 5.0).unwrap().is_empty());
    }
}
