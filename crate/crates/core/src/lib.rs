//! Neural signed distance fields with a trainable spline positional encoding.
//!
//! The [`encoding`] module maps coordinates to features, [`network`] holds the
//! field MLP and its derivative passes, [`training`] fits models to point
//! clouds, images and sampled SDFs, [`geometry`] carries shapes, grids and
//! metrics, and [`io`] reads and writes the supported file formats.

pub mod encoding;
pub mod error;
pub mod geometry;
pub mod io;
pub mod network;
pub mod training;

pub use encoding::{Encoder, EncoderSpec, FourierEncoding, SplineConfig, SplineEncoding};
pub use error::{Error, FileFormatError, Position, Result};
pub use geometry::{AnalyticShape, Image, PointCloud, ScalarGrid, Similarity, TriangleMesh};
pub use network::{Checkpoint, FieldModel, Mlp, MlpShape, ModelSpec};
