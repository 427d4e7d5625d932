use std::collections::HashMap;

use rand::Rng;

use super::pointcloud::{norm, Point3, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((t, _)) = triangles.iter().enumerate().find(|(_, t)| t.iter().any(|&i| i >= n)) {
            return Err(Error::invalid(format!("triangle {t} references a vertex out of range")));
        }
        Ok(TriangleMesh { vertices, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [&Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [&self.vertices[a], &self.vertices[b], &self.vertices[c]]
    }

    /// Non-normalized face normal (twice the area, right-hand winding).
    pub fn face_cross(&self, t: usize) -> Point3 {
        let [a, b, c] = self.corners(t);
        cross(&sub(b, a), &sub(c, a))
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * norm(&self.face_cross(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// How many triangles use each undirected edge.
    pub fn edge_use_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every undirected edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        !self.triangles.is_empty() && self.edge_use_counts().values().all(|&c| c == 2)
    }

    /// Area-weighted uniform samples with face normals.
    pub fn sample_surface<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PointCloud> {
        if self.triangles.is_empty() {
            return Err(Error::invalid("cannot sample a mesh without triangles"));
        }
        let mut cdf = Vec::with_capacity(self.triangles.len());
        let mut acc = 0.0;
        for t in 0..self.triangles.len() {
            acc += self.area(t);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::invalid("mesh has zero surface area"));
        }
        let mut positions = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.random::<f64>() * acc;
            let t = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let [a, b, c] = self.corners(t);
            let (mut r1, mut r2) = (rng.random::<f64>(), rng.random::<f64>());
            if r1 + r2 > 1.0 {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            positions.push(std::array::from_fn(|i| a[i] + r1 * (b[i] - a[i]) + r2 * (c[i] - a[i])));
            let fc = self.face_cross(t);
            let l = norm(&fc);
            normals.push(if l > 0.0 { fc.map(|v| v / l) } else { [0.0, 0.0, 1.0] });
        }
        PointCloud::new(positions, Some(normals))
    }

    /// Icosahedron subdivided `levels` times and projected onto a sphere.
    pub fn icosphere(radius: f64, levels: usize) -> TriangleMesh {
        let p = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point3> = vec![
            [-1.0, p, 0.0],
            [1.0, p, 0.0],
            [-1.0, -p, 0.0],
            [1.0, -p, 0.0],
            [0.0, -1.0, p],
            [0.0, 1.0, p],
            [0.0, -1.0, -p],
            [0.0, 1.0, -p],
            [p, 0.0, -1.0],
            [p, 0.0, 1.0],
            [-p, 0.0, -1.0],
            [-p, 0.0, 1.0],
        ];
        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..levels {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(triangles.len() * 4);
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point3>| {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let (va, vb) = (verts[a], verts[b]);
                    verts.push(std::array::from_fn(|i| 0.5 * (va[i] + vb[i])));
                    verts.len() - 1
                })
            };
            for [a, b, c] in triangles {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            triangles = next;
        }
        for v in &mut vertices {
            let l = norm(v);
            *v = v.map(|x| x * radius / l);
        }
        TriangleMesh { vertices, triangles }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn right_triangle_centroid() {
        let m = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let n = 100_000;
        let pc = m.sample_surface(n, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c = pc.centroid();
        // Per-axis std of a uniform point on this triangle is sqrt(1/18).
        let sigma = (1.0f64 / 18.0).sqrt() / (n as f64).sqrt();
        assert!((c[0] - 1.0 / 3.0).abs() < 3.0 * sigma);
        assert!((c[1] - 1.0 / 3.0).abs() < 3.0 * sigma);
        assert!(pc.normals_are_unit());
        assert!(pc.normals.unwrap().iter().all(|n| *n == [0.0, 0.0, 1.0]));
    }

    #[test]
    fn area_weighted_selection() {
        // Areas 1 and 3, separated along x.
        let m = TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [10.0, 0.0, 0.0],
                [13.0, 0.0, 0.0],
                [10.0, 2.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let n = 100_000;
        let pc = m.sample_surface(n, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let second = pc.positions.iter().filter(|p| p[0] >= 10.0).count() as f64;
        let frac = second / n as f64;
        let sigma = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((frac - 0.75).abs() < 4.0 * sigma, "{frac}");
    }

    #[test]
    fn icosphere_is_closed_and_outward() {
        let m = TriangleMesh::icosphere(0.5, 2);
        assert_eq!(m.triangles.len(), 320);
        assert!(m.is_closed());
        for t in 0..m.triangles.len() {
            let c = m.corners(t);
            let centre: Point3 = std::array::from_fn(|i| (c[0][i] + c[1][i] + c[2][i]) / 3.0);
            let n = m.face_cross(t);
            assert!(n.iter().zip(&centre).map(|(a, b)| a * b).sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn out_of_range_index() {
        assert!(TriangleMesh::new(vec![[0.0; 3]], vec![[0, 0, 1]]).is_err());
    }

    #[test]
    fn empty_mesh_cannot_be_sampled() {
        let m = TriangleMesh::default();
        assert!(m.sample_surface(5, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
