//! Fitting a coordinate network to a raster image.

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, OptimState};
use super::config::EncoderChoice;
use super::loss::l2_grad;
use super::sdf::{stream_rng, STREAM_INIT};
use crate::error::{Error, Result};
use crate::geometry::Image;
use crate::network::{FieldModel, Mlp, MlpShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFitConfig {
    pub encoder: EncoderChoice,
    /// Spline segment count.
    pub segments: usize,
    pub hidden: usize,
    pub depth: usize,
    pub lr: f64,
    /// Full-batch steps over all pixels.
    pub steps: usize,
    pub seed: u64,
}

impl Default for ImageFitConfig {
    fn default() -> Self {
        ImageFitConfig {
            encoder: EncoderChoice::spline(64, 32),
            segments: 128,
            hidden: 256,
            depth: 4,
            lr: 1e-3,
            steps: 1000,
            seed: 0,
        }
    }
}

/// Trains on every pixel centre each step with the L2 loss. Returns the
/// model and the per-step losses.
pub fn fit_image(image: &Image, cfg: &ImageFitConfig) -> Result<(FieldModel, Vec<f64>)> {
    if cfg.segments == 0 || !(cfg.lr > 0.0) {
        return Err(Error::invalid("image fitting needs K >= 1 and lr > 0"));
    }
    let mut rng = stream_rng(cfg.seed, STREAM_INIT);
    let encoder = cfg.encoder.build(2, cfg.segments, &mut rng)?;
    let shape = MlpShape::new(encoder.out_dim(), cfg.hidden, cfg.depth, image.channels);
    let mlp = Mlp::init_random(shape, &mut rng)?;
    let mut model = FieldModel::new(encoder, mlp)?;
    let uv = Image::uv_grid(image.width, image.height);
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut state = OptimState::new(model.param_count());
    let mut params = model.params();
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (loss, grads) = l2_grad(&model, &uv, &image.data)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                step: step + 1,
                stage_k: cfg.segments,
                detail: "image L2 loss".into(),
            });
        }
        losses.push(loss);
        adam_step(&mut state, &mut params, &grads.concat(), &adam)?;
        model.set_params(&params)?;
    }
    Ok((model, losses))
}

/// Evaluates a 2D model at the pixel centres of a `width x height` raster,
/// clamping to `[0, 1]`.
pub fn render_image(model: &FieldModel, width: usize, height: usize) -> Result<Image> {
    if model.dim() != 2 {
        return Err(Error::invalid("rendering needs a 2D model"));
    }
    let channels = model.output_dim();
    let uv = Image::uv_grid(width, height);
    let mut data = Vec::with_capacity(width * height * channels);
    for chunk in uv.chunks(2 * 4096) {
        let pass = model.run(chunk, false);
        data.extend(pass.output().iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Image::new(width, height, channels, data)
}

/// `cells x cells` black and white squares.
pub fn checkerboard(size: usize, cells: usize) -> Result<Image> {
    if cells == 0 || size == 0 {
        return Err(Error::invalid("checkerboard needs positive size and cell count"));
    }
    let data = (0..size * size)
        .map(|i| {
            let (y, x) = (i / size, i % size);
            (((x * cells / size) + (y * cells / size)) % 2) as f64
        })
        .collect();
    Image::new(size, size, 1, data)
}
