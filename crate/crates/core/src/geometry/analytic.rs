//! Closed-form shapes used as ground truth.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pointcloud::{norm, Point3, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticShape {
    Sphere { radius: f64 },
    /// Axis-aligned box centred at the origin.
    Box { half_extents: Point3 },
    /// Torus around the z axis.
    Torus { major: f64, minor: f64 },
}

impl AnalyticShape {
    pub fn sphere(radius: f64) -> Result<Self> {
        Self::Sphere { radius }.validated()
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        Self::Torus { major, minor }.validated()
    }

    pub fn cuboid(half_extents: Point3) -> Result<Self> {
        Self::Box { half_extents }.validated()
    }

    fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Sphere { radius } => radius > 0.0,
            Self::Box { half_extents } => half_extents.iter().all(|h| *h > 0.0),
            Self::Torus { major, minor } => major > 0.0 && minor > 0.0,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::invalid(format!("shape parameters must be positive: {self}")))
        }
    }

    /// Exact signed distance, negative inside.
    pub fn sdf(&self, x: &Point3) -> f64 {
        match *self {
            Self::Sphere { radius } => norm(x) - radius,
            Self::Box { half_extents: h } => {
                let q: Point3 = std::array::from_fn(|i| x[i].abs() - h[i]);
                let outside = norm(&q.map(|v| v.max(0.0)));
                let inside = q[0].max(q[1]).max(q[2]).min(0.0);
                outside + inside
            }
            Self::Torus { major, minor } => {
                let ring = (x[0] * x[0] + x[1] * x[1]).sqrt() - major;
                (ring * ring + x[2] * x[2]).sqrt() - minor
            }
        }
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Self::Sphere { radius } => 4.0 * PI * radius * radius,
            Self::Box { half_extents: h } => 8.0 * (h[0] * h[1] + h[1] * h[2] + h[0] * h[2]),
            Self::Torus { major, minor } => 4.0 * PI * PI * major * minor,
        }
    }

    /// Uniform (area-weighted) surface samples with exact outward normals.
    pub fn sample_surface<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PointCloud {
        let mut positions = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for _ in 0..n {
            let (p, nrm) = self.sample_one(rng);
            positions.push(p);
            normals.push(nrm);
        }
        PointCloud {
            positions,
            normals: Some(normals),
            transform: None,
        }
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> (Point3, Point3) {
        match *self {
            Self::Sphere { radius } => loop {
                let v: Point3 = std::array::from_fn(|_| StandardNormal.sample(rng));
                let l = norm(&v);
                if l > 1e-12 {
                    let u = v.map(|c| c / l);
                    return (u.map(|c| c * radius), u);
                }
            },
            Self::Torus { major, minor } => {
                let u = rng.random_range(0.0..2.0 * PI);
                let v = loop {
                    let v = rng.random_range(0.0..2.0 * PI);
                    let accept = (major + minor * v.cos()) / (major + minor);
                    if rng.random::<f64>() < accept {
                        break v;
                    }
                };
                let (su, cu) = u.sin_cos();
                let (sv, cv) = v.sin_cos();
                let ring = major + minor * cv;
                ([ring * cu, ring * su, minor * sv], [cv * cu, cv * su, sv])
            }
            Self::Box { half_extents: h } => {
                let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, a) in areas.iter().enumerate() {
                    if pick < *a {
                        axis = i;
                        break;
                    }
                    pick -= a;
                }
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut p: Point3 = std::array::from_fn(|i| rng.random_range(-h[i]..h[i]));
                p[axis] = sign * h[axis];
                let mut nrm = [0.0; 3];
                nrm[axis] = sign;
                (p, nrm)
            }
        }
    }
}

impl fmt::Display for AnalyticShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sphere { radius } => write!(f, "sphere:{radius}"),
            Self::Box { half_extents: h } => write!(f, "box:{}:{}:{}", h[0], h[1], h[2]),
            Self::Torus { major, minor } => write!(f, "torus:{major}:{minor}"),
        }
    }
}

impl FromStr for AnalyticShape {
    type Err = Error;

    /// `sphere:r`, `torus:R:r` or `box:hx:hy:hz`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default();
        let nums: Vec<f64> = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number {p:?} in shape {s:?}")))
            })
            .collect::<Result<_>>()?;
        match (kind, nums.as_slice()) {
            ("sphere", [r]) => Self::sphere(*r),
            ("torus", [big, small]) => Self::torus(*big, *small),
            ("box", [x, y, z]) => Self::cuboid([*x, *y, *z]),
            _ => Err(Error::invalid(format!(
                "unknown shape {s:?} (expected sphere:r, torus:R:r or box:hx:hy:hz)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_values() {
        let s = AnalyticShape::sphere(0.5).unwrap();
        assert_eq!(s.sdf(&[0.0; 3]), -0.5);
        assert_eq!(s.sdf(&[1.0, 0.0, 0.0]), 0.5);
    }

    #[test]
    fn torus_tube_axis() {
        let t = AnalyticShape::torus(0.4, 0.15).unwrap();
        assert!((t.sdf(&[0.4, 0.0, 0.0]) + 0.15).abs() < 1e-15);
        assert!((t.sdf(&[0.0, 0.0, 0.0]) - (0.4f64 - 0.15)).abs() < 1e-15);
    }

    #[test]
    fn box_values() {
        let b = AnalyticShape::cuboid([0.3, 0.2, 0.1]).unwrap();
        assert!((b.sdf(&[0.0; 3]) + 0.1).abs() < 1e-15);
        assert!((b.sdf(&[0.5, 0.0, 0.0]) - 0.2).abs() < 1e-15);
        assert!((b.sdf(&[0.6, 0.6, 0.1]) - (0.09f64 + 0.16).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn surface_samples_lie_on_surface() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for shape in ["sphere:0.5", "torus:0.4:0.15", "box:0.3:0.2:0.4"] {
            let s: AnalyticShape = shape.parse().unwrap();
            let pc = s.sample_surface(2000, &mut r);
            assert!(pc.normals_are_unit());
            for (p, n) in pc.positions.iter().zip(pc.normals.as_ref().unwrap()) {
                assert!(s.sdf(p).abs() < 1e-9, "{shape}");
                // Normal agrees with the SDF gradient.
                let h = 1e-6;
                let q: Point3 = std::array::from_fn(|i| p[i] + h * n[i]);
                assert!(((s.sdf(&q) - s.sdf(p)) / h - 1.0).abs() < 1e-4, "{shape}");
            }
        }
    }

    #[test]
    fn torus_sampling_is_area_uniform() {
        // Fraction of area on the outer half (cos v > 0) is (1/2 + r/(πR)).
        let (big, small) = (0.4, 0.15);
        let t = AnalyticShape::torus(big, small).unwrap();
        let n = 100_000;
        let pc = t.sample_surface(n, &mut ChaCha8Rng::seed_from_u64(2));
        let outer = pc
            .positions
            .iter()
            .filter(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() > big)
            .count() as f64
            / n as f64;
        let expected = 0.5 + small / (PI * big);
        assert!((outer - expected).abs() < 0.01, "{outer} vs {expected}");
    }

    #[test]
    fn parse_and_display() {
        let t: AnalyticShape = "torus:0.4:0.15".parse().unwrap();
        assert_eq!(t.to_string(), "torus:0.4:0.15");
        assert!("cone:1".parse::<AnalyticShape>().is_err());
        assert!("sphere:-1".parse::<AnalyticShape>().is_err());
        assert!("sphere:x".parse::<AnalyticShape>().is_err());
    }
}
