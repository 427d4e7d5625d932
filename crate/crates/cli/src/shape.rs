use rand::Rng;
use spe_core::geometry::{mesh_sdf_bruteforce, Point3};
use spe_core::io::read_obj;
use spe_core::{AnalyticShape, PointCloud, TriangleMesh};

use crate::error::{CliError, CliResult};

/// A ground-truth shape given on the command line.
#[derive(Debug, Clone)]
pub enum GroundTruth {
    Analytic(AnalyticShape),
    Mesh(TriangleMesh),
}

fn numbers(tag: &str, rest: &[&str]) -> CliResult<Vec<f64>> {
    rest.iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::usage(format!("{tag}: '{s}' is not a number")))
        })
        .collect()
}

/// Parses `sphere:R`, `torus:R:r`, `box:H` or `box:HX:HY:HZ`.
pub fn parse_analytic(spec: &str) -> CliResult<AnalyticShape> {
    let parts: Vec<&str> = spec.split(':').collect();
    let v = numbers(parts[0], &parts[1..])?;
    let shape = match (parts[0], v.as_slice()) {
        ("sphere", [r]) => AnalyticShape::sphere(*r),
        ("torus", [big, small]) => AnalyticShape::torus(*big, *small),
        ("box", [h]) => AnalyticShape::cuboid([*h; 3]),
        ("box", [x, y, z]) => AnalyticShape::cuboid([*x, *y, *z]),
        ("sphere" | "torus" | "box", _) => {
            return Err(CliError::usage(format!("wrong number of parameters in shape '{spec}'")))
        }
        (tag, _) => return Err(CliError::usage(format!("unknown shape tag '{tag}' in '{spec}'"))),
    };
    shape.map_err(|e| CliError::usage(format!("shape '{spec}': {e}")))
}

/// [`parse_analytic`] plus `mesh:PATH`.
pub fn parse_ground_truth(spec: &str) -> CliResult<GroundTruth> {
    if let Some(path) = spec.strip_prefix("mesh:") {
        let path = crate::error::existing(path.as_ref())?;
        let mesh = read_obj(&path)?;
        if mesh.is_empty() {
            return Err(CliError::usage(format!("{}: mesh has no triangles", path.display())));
        }
        return Ok(GroundTruth::Mesh(mesh));
    }
    parse_analytic(spec).map(GroundTruth::Analytic)
}

impl GroundTruth {
    pub fn sdf(&self, x: &Point3) -> f64 {
        match self {
            GroundTruth::Analytic(s) => s.sdf(x),
            GroundTruth::Mesh(m) => mesh_sdf_bruteforce(m, x).unwrap_or(f64::NAN),
        }
    }

    pub fn sample_surface<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CliResult<PointCloud> {
        Ok(match self {
            GroundTruth::Analytic(s) => s.sample_surface(n, rng),
            GroundTruth::Mesh(m) => m.sample_surface(n, rng)?,
        })
    }
}
