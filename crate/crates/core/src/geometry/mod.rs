//! Geometry carriers, ground-truth fields, surface extraction and metrics.

pub mod analytic;
pub mod eval;
pub mod grid;
pub mod image;
pub mod kdtree;
pub mod marching_cubes;
mod mc_tables;
pub mod mesh;
pub mod mesh_sdf;
pub mod metrics;
pub mod pointcloud;

pub use analytic::AnalyticShape;
pub use eval::{extract_level_set, mesh_chamfer, model_sdf_grid, sdf_mae};
pub use grid::{evaluate_grid, Aabb, ScalarGrid};
pub use image::Image;
pub use kdtree::KdTree;
pub use marching_cubes::marching_cubes;
pub use mesh::TriangleMesh;
pub use mesh_sdf::{closest_point_on_triangle, mesh_sdf_bruteforce};
pub use metrics::{chamfer, chamfer_bruteforce, mae, psnr, psnr_from_mse};
pub use pointcloud::{Point3, PointCloud, Similarity};
