use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Uniform scale followed by a translation: `y = scale * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub scale: f64,
    pub translation: Point3,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        scale: 1.0,
        translation: [0.0; 3],
    };

    pub fn apply(&self, x: &Point3) -> Point3 {
        std::array::from_fn(|i| self.scale * x[i] + self.translation[i])
    }

    pub fn invert(&self, y: &Point3) -> Point3 {
        std::array::from_fn(|i| (y[i] - self.translation[i]) / self.scale)
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &Similarity) -> Similarity {
        Similarity {
            scale: self.scale * inner.scale,
            translation: std::array::from_fn(|i| self.scale * inner.translation[i] + self.translation[i]),
        }
    }
}

/// Oriented point samples of a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Point3>,
    /// Unit normals, one per position, when known.
    pub normals: Option<Vec<Point3>>,
    /// Transform applied to reach the current coordinates, if any.
    pub transform: Option<Similarity>,
}

pub fn norm(v: &Point3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dist(a: &Point3, b: &Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    norm(&d)
}

impl PointCloud {
    pub fn new(positions: Vec<Point3>, normals: Option<Vec<Point3>>) -> Result<Self> {
        if let Some(n) = &normals {
            if n.len() != positions.len() {
                return Err(Error::invalid(format!(
                    "{} normals for {} points",
                    n.len(),
                    positions.len()
                )));
            }
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point positions must be finite"));
        }
        Ok(PointCloud {
            positions,
            normals,
            transform: None,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.positions.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for i in 0..3 {
                c[i] += p[i];
            }
        }
        c.map(|v| v / n)
    }

    /// Normals are unit length to 1e-6.
    pub fn normals_are_unit(&self) -> bool {
        self.normals
            .as_ref()
            .is_some_and(|ns| ns.iter().all(|n| (norm(n) - 1.0).abs() < 1e-6))
    }

    pub fn max_abs_coordinate(&self) -> f64 {
        self.positions
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Centroid to the origin and farthest point at distance `radius`.
    pub fn normalize_to_ball(&self, radius: f64) -> Result<(PointCloud, Similarity)> {
        if self.is_empty() {
            return Err(Error::invalid("cannot normalize an empty point cloud"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        let c = self.centroid();
        let far = self
            .positions
            .iter()
            .map(|p| dist(p, &c))
            .fold(0.0f64, f64::max);
        if far == 0.0 {
            return Err(Error::invalid("all points coincide; cannot normalize"));
        }
        let s = radius / far;
        let t = Similarity {
            scale: s,
            translation: c.map(|v| -s * v),
        };
        let out = PointCloud {
            // (x - c) * s is exact where s * x - s * c may not be.
            positions: self
                .positions
                .iter()
                .map(|p| std::array::from_fn(|i| (p[i] - c[i]) * s))
                .collect(),
            normals: self.normals.clone(),
            transform: Some(match &self.transform {
                Some(prev) => t.compose(prev),
                None => t,
            }),
        };
        Ok((out, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> PointCloud {
        PointCloud::new(
            vec![[0.9, 0.0, 0.0], [-0.9, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, -0.5, 0.0]],
            Some(vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]]),
        )
        .unwrap()
    }

    #[test]
    fn already_normalized_is_identity() {
        let (out, t) = cloud().normalize_to_ball(0.9).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.translation.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(out.positions, cloud().positions);
    }

    #[test]
    fn scale_and_shift_invariant() {
        let base = cloud();
        let moved = PointCloud::new(
            base.positions
                .iter()
                .map(|p| [5.0 * p[0] + 1.0, 5.0 * p[1] - 2.0, 5.0 * p[2] + 3.0])
                .collect(),
            base.normals.clone(),
        )
        .unwrap();
        let (a, _) = base.normalize_to_ball(0.9).unwrap();
        let (b, t) = moved.normalize_to_ball(0.9).unwrap();
        for (p, q) in a.positions.iter().zip(&b.positions) {
            assert!(dist(p, q) < 1e-12);
        }
        assert_eq!(b.normals, moved.normals);
        for (orig, y) in moved.positions.iter().zip(&b.positions) {
            assert!(dist(orig, &t.invert(y)) < 1e-12);
        }
    }

    #[test]
    fn idempotent() {
        let moved = PointCloud::new(vec![[3.0, 1.0, 2.0], [1.0, 1.0, 1.0], [0.0, 4.0, 1.0]], None).unwrap();
        let (a, _) = moved.normalize_to_ball(0.9).unwrap();
        let (b, t) = a.normalize_to_ball(0.9).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        for (p, q) in a.positions.iter().zip(&b.positions) {
            assert!(dist(p, q) < 1e-12);
        }
    }

    #[test]
    fn empty_rejected() {
        let e = PointCloud::new(vec![], None).unwrap();
        assert!(e.normalize_to_ball(0.9).is_err());
    }
}
