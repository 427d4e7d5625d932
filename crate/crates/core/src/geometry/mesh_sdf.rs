//! Brute-force signed distance to a closed triangle mesh.

use super::mesh::{cross, TriangleMesh};
use super::pointcloud::{norm, Point3};
use crate::error::{Error, Result};

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lerp(a: &Point3, d: &Point3, t: f64) -> Point3 {
    [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return lerp(a, &ab, d1 / (d1 - d3));
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return lerp(a, &ac, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let bc = sub(c, b);
        return lerp(b, &bc, (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [
        a[0] + ab[0] * v + ac[0] * w,
        a[1] + ab[1] * v + ac[1] * w,
        a[2] + ab[2] * v + ac[2] * w,
    ]
}

enum Hit {
    Miss,
    Hit,
    /// Too close to an edge or vertex to count reliably.
    Degenerate,
}

fn ray_triangle(o: &Point3, dir: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Hit {
    const EDGE_EPS: f64 = 1e-9;
    let e1 = sub(b, a);
    let e2 = sub(c, a);
    let pv = cross(dir, &e2);
    let det = dot(&e1, &pv);
    if det.abs() < 1e-14 {
        return Hit::Miss;
    }
    let inv = 1.0 / det;
    let tv = sub(o, a);
    let u = dot(&tv, &pv) * inv;
    let qv = cross(&tv, &e1);
    let v = dot(dir, &qv) * inv;
    let t = dot(&e2, &qv) * inv;
    if t <= 0.0 {
        return Hit::Miss;
    }
    let w = 1.0 - u - v;
    if u < -EDGE_EPS || v < -EDGE_EPS || w < -EDGE_EPS {
        return Hit::Miss;
    }
    if u < EDGE_EPS || v < EDGE_EPS || w < EDGE_EPS {
        return Hit::Degenerate;
    }
    Hit::Hit
}

const RAY_DIRECTIONS: [Point3; 6] = [
    [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
    [0.2672612419124244, -0.5345224838248488, 0.8017837257372732],
    [-0.6960332781799741, 0.13920665563599482, 0.7043856775181337],
    [0.8164965809277261, 0.4082482904638631, -0.4082482904638631],
    [-0.30151134457776363, -0.9045340337332909, -0.30151134457776363],
    [0.12409431416253751, 0.6204715708126876, -0.7743485203742341],
];

/// Signed distance from `x` to a closed mesh: unsigned point-triangle distance,
/// negative when a ray from `x` crosses the mesh an odd number of times.
pub fn mesh_sdf_bruteforce(mesh: &TriangleMesh, x: &Point3) -> Result<f64> {
    if mesh.triangles.is_empty() {
        return Err(Error::invalid("mesh has no triangles"));
    }
    let mut best = f64::INFINITY;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.corners(t);
        let q = closest_point_on_triangle(x, a, b, c);
        best = best.min(norm(&sub(x, &q)));
    }
    'dirs: for dir in &RAY_DIRECTIONS {
        let mut crossings = 0usize;
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.corners(t);
            match ray_triangle(x, dir, a, b, c) {
                Hit::Miss => {}
                Hit::Hit => crossings += 1,
                Hit::Degenerate => continue 'dirs,
            }
        }
        return Ok(if crossings % 2 == 1 { -best } else { best });
    }
    Err(Error::invalid(format!(
        "every ray from {x:?} grazes a mesh edge; sign is undefined"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pointcloud::dist;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ray_directions_are_unit() {
        for d in &RAY_DIRECTIONS {
            assert!((norm(d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closest_point_regions() {
        let a = [0.0, 0.0, 0.0];
        let b = [1.0, 0.0, 0.0];
        let c = [0.0, 1.0, 0.0];
        assert_eq!(closest_point_on_triangle(&[-1.0, -1.0, 0.0], &a, &b, &c), a);
        let f = closest_point_on_triangle(&[0.2, 0.2, 3.0], &a, &b, &c);
        assert!(dist(&f, &[0.2, 0.2, 0.0]) < 1e-15);
        let e = closest_point_on_triangle(&[1.0, 1.0, 0.0], &a, &b, &c);
        assert!((e[0] - 0.5).abs() < 1e-15 && (e[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn icosphere_matches_sphere() {
        let mesh = TriangleMesh::icosphere(0.5, 4);
        let mut r = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x: Point3 = std::array::from_fn(|_| r.random_range(-1.0..1.0));
            let s = mesh_sdf_bruteforce(&mesh, &x).unwrap();
            assert!((s - (norm(&x) - 0.5)).abs() < 0.01, "{x:?}: {s}");
        }
    }

    #[test]
    fn far_point_and_centre() {
        let mesh = TriangleMesh::icosphere(0.5, 3);
        let far = mesh_sdf_bruteforce(&mesh, &[10.0, 0.0, 0.0]).unwrap();
        assert!((far - 9.5).abs() < 0.01);
        assert!(mesh_sdf_bruteforce(&mesh, &[0.0; 3]).unwrap() < 0.0);
    }
}
