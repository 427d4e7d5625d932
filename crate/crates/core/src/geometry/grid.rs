use super::pointcloud::Point3;
use crate::error::{Error, Result};
use crate::network::FieldModel;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// `[-1, 1]^3`.
    pub const UNIT: Aabb = Aabb {
        min: [-1.0; 3],
        max: [1.0; 3],
    };

    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if (0..3).all(|i| min[i] < max[i] && min[i].is_finite() && max[i].is_finite()) {
            Ok(Aabb { min, max })
        } else {
            Err(Error::invalid(format!("invalid bounds {min:?} .. {max:?}")))
        }
    }

    pub fn center(&self) -> Point3 {
        std::array::from_fn(|i| 0.5 * (self.min[i] + self.max[i]))
    }
}

/// Field values on the corner lattice of a box. Values are row-major with the
/// x index slowest: `values[(i * ny + j) * nz + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub res: [usize; 3],
    pub bounds: Aabb,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(res: [usize; 3], bounds: Aabb, values: Vec<f64>) -> Result<Self> {
        check_res(res)?;
        if values.len() != res.iter().product::<usize>() {
            return Err(Error::invalid(format!(
                "grid of resolution {res:?} needs {} values, got {}",
                res.iter().product::<usize>(),
                values.len()
            )));
        }
        Ok(ScalarGrid { res, bounds, values })
    }

    pub fn from_fn(res: [usize; 3], bounds: Aabb, mut f: impl FnMut(&Point3) -> f64) -> Result<Self> {
        check_res(res)?;
        let mut values = Vec::with_capacity(res.iter().product());
        for i in 0..res[0] {
            for j in 0..res[1] {
                for k in 0..res[2] {
                    values.push(f(&lattice_point(&bounds, res, [i, j, k])));
                }
            }
        }
        Ok(ScalarGrid { res, bounds, values })
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.res[1] + j) * self.res[2] + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        lattice_point(&self.bounds, self.res, [i, j, k])
    }

    /// Lattice spacing per axis.
    pub fn spacing(&self) -> Point3 {
        std::array::from_fn(|a| (self.bounds.max[a] - self.bounds.min[a]) / (self.res[a] - 1) as f64)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    }
}

fn check_res(res: [usize; 3]) -> Result<()> {
    if res.iter().any(|&r| r < 2) {
        return Err(Error::invalid(format!("grid resolution must be at least 2 per axis, got {res:?}")));
    }
    Ok(())
}

fn lattice_point(b: &Aabb, res: [usize; 3], idx: [usize; 3]) -> Point3 {
    std::array::from_fn(|a| {
        let t = idx[a] as f64 / (res[a] - 1) as f64;
        b.min[a] + t * (b.max[a] - b.min[a])
    })
}

/// Samples a scalar-output 3D model on the lattice.
pub fn evaluate_grid(model: &FieldModel, bounds: Aabb, res: [usize; 3]) -> Result<ScalarGrid> {
    check_res(res)?;
    if model.dim() != 3 {
        return Err(Error::invalid("grid evaluation needs a 3D model"));
    }
    let mut values = Vec::with_capacity(res.iter().product());
    // One x-slab at a time keeps the point buffer small.
    let mut slab = Vec::with_capacity(res[1] * res[2] * 3);
    for i in 0..res[0] {
        slab.clear();
        for j in 0..res[1] {
            for k in 0..res[2] {
                slab.extend_from_slice(&lattice_point(&bounds, res, [i, j, k]));
            }
        }
        values.extend(model.forward_batch(&slab)?);
    }
    ScalarGrid::new(res, bounds, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{Encoder, SplineConfig, SplineEncoding};
    use crate::network::{Layer, Mlp, MlpShape};
    use ndarray::{arr1, arr2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_model() {
        let mut mlp = Mlp::zeros(MlpShape::new(3, 4, 2, 1)).unwrap();
        mlp.layers_mut()[1].bias[0] = -0.2;
        let m = FieldModel::new(Encoder::identity(3), mlp).unwrap();
        let g = evaluate_grid(&m, Aabb::UNIT, [3, 4, 5]).unwrap();
        assert_eq!(g.values.len(), 60);
        assert!(g.values.iter().all(|v| *v == -0.2));
    }

    #[test]
    fn linear_model_is_linear_along_axes() {
        let layer = Layer {
            weight: arr2(&[[0.5, -1.0, 2.0]]),
            bias: arr1(&[0.0]),
        };
        let m = FieldModel::new(Encoder::identity(3), Mlp::from_layers(vec![layer]).unwrap()).unwrap();
        let g = evaluate_grid(&m, Aabb::UNIT, [5, 5, 5]).unwrap();
        let h = g.spacing();
        for i in 0..4 {
            assert!(((g.get(i + 1, 2, 3) - g.get(i, 2, 3)) - 0.5 * h[0]).abs() < 1e-14);
            assert!(((g.get(1, i + 1, 3) - g.get(1, i, 3)) + h[1]).abs() < 1e-14);
            assert!(((g.get(1, 2, i + 1) - g.get(1, 2, i)) - 2.0 * h[2]).abs() < 1e-14);
        }
    }

    #[test]
    fn spot_check_against_forward() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let enc = SplineEncoding::new(SplineConfig::new(3, 8, 4, 3), &mut r).unwrap();
        let mlp = Mlp::init_random(MlpShape::new(4, 8, 3, 1), &mut r).unwrap();
        let m = FieldModel::new(Encoder::Spline(enc), mlp).unwrap();
        let g = evaluate_grid(&m, Aabb::UNIT, [9, 7, 6]).unwrap();
        for _ in 0..10 {
            let (i, j, k) = (r.random_range(0..9), r.random_range(0..7), r.random_range(0..6));
            let v = m.forward(&g.point(i, j, k)).unwrap()[0];
            assert!((g.get(i, j, k) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn resolution_checked() {
        assert!(ScalarGrid::from_fn([1, 4, 4], Aabb::UNIT, |_| 0.0).is_err());
        assert!(ScalarGrid::new([2, 2, 2], Aabb::UNIT, vec![0.0; 7]).is_err());
        assert!(Aabb::new([0.0; 3], [0.0, 1.0, 1.0]).is_err());
    }
}
