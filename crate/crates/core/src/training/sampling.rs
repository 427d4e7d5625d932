use rand::Rng;

use super::loss::SdfBatch;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, PointCloud};

/// `n` surface points drawn uniformly with replacement from `pc`, and `n`
/// domain points uniform in `bbox`.
pub fn sample_batches<R: Rng + ?Sized>(pc: &PointCloud, bbox: &Aabb, n: usize, rng: &mut R) -> Result<SdfBatch> {
    let normals = pc
        .normals
        .as_ref()
        .ok_or_else(|| Error::invalid("SDF fitting needs a point cloud with normals"))?;
    if pc.is_empty() || n == 0 {
        return Err(Error::invalid("cannot sample from an empty cloud or with n = 0"));
    }
    let mut batch = SdfBatch {
        dim: 3,
        surface: Vec::with_capacity(3 * n),
        normals: Vec::with_capacity(3 * n),
        domain: Vec::with_capacity(3 * n),
    };
    for _ in 0..n {
        let i = rng.random_range(0..pc.len());
        batch.surface.extend_from_slice(&pc.positions[i]);
        batch.normals.extend_from_slice(&normals[i]);
    }
    for _ in 0..n {
        for a in 0..3 {
            batch.domain.push(rng.random_range(bbox.min[a]..bbox.max[a]));
        }
    }
    Ok(batch)
}
