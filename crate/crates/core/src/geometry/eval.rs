//! Reconstruction quality of a fitted field against ground truth.
//!
//! Fields are fitted in a normalized frame. `normalization` maps input
//! coordinates into that frame; every result here is in input units.

use rand::Rng;

use super::grid::{evaluate_grid, Aabb, ScalarGrid};
use super::marching_cubes::marching_cubes;
use super::mesh::TriangleMesh;
use super::metrics::{chamfer, mae};
use super::pointcloud::{Point3, Similarity};
use crate::error::{Error, Result};
use crate::network::FieldModel;

/// The model's level set `iso` (input units) sampled on `res^3` lattice
/// points spanning `[-1, 1]^3` of the model frame.
pub fn extract_level_set(
    model: &FieldModel,
    normalization: Option<&Similarity>,
    res: usize,
    iso: f64,
) -> Result<TriangleMesh> {
    let t = normalization.copied().unwrap_or(Similarity::IDENTITY);
    let grid = evaluate_grid(model, Aabb::UNIT, [res; 3])?;
    let mut mesh = marching_cubes(&grid, iso * t.scale)?;
    for v in &mut mesh.vertices {
        *v = t.invert(v);
    }
    Ok(mesh)
}

/// Chamfer distance between `n` area-uniform samples of `mesh` and
/// `reference`.
pub fn mesh_chamfer<R: Rng + ?Sized>(mesh: &TriangleMesh, reference: &[Point3], n: usize, rng: &mut R) -> Result<f64> {
    if mesh.is_empty() {
        return Err(Error::invalid("extracted surface is empty; the field has no zero crossing"));
    }
    let samples = mesh.sample_surface(n, rng)?;
    chamfer(&samples.positions, reference)
}

/// The model's SDF in input units on `res^3` points of the model frame's
/// `[-1, 1]^3`, mapped back to input coordinates.
pub fn model_sdf_grid(model: &FieldModel, normalization: Option<&Similarity>, res: usize) -> Result<ScalarGrid> {
    let t = normalization.copied().unwrap_or(Similarity::IDENTITY);
    let mut grid = evaluate_grid(model, Aabb::UNIT, [res; 3])?;
    grid.values.iter_mut().for_each(|v| *v /= t.scale);
    grid.bounds = Aabb::new(t.invert(&Aabb::UNIT.min), t.invert(&Aabb::UNIT.max))?;
    Ok(grid)
}

/// Mean absolute SDF error over the lattice of [`model_sdf_grid`].
pub fn sdf_mae(
    model: &FieldModel,
    normalization: Option<&Similarity>,
    truth: impl FnMut(&Point3) -> f64,
    res: usize,
) -> Result<f64> {
    let fitted = model_sdf_grid(model, normalization, res)?;
    let reference = ScalarGrid::from_fn(fitted.res, fitted.bounds, truth)?;
    mae(&fitted, &reference)
}
