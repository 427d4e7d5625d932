//! Direct L1 regression of a ground-truth SDF sampled on a lattice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, OptimState};
use super::config::EncoderChoice;
use super::loss::l1_regression_grad;
use super::sdf::{stream_rng, STREAM_FIT, STREAM_INIT};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, ScalarGrid};
use crate::network::{FieldModel, Mlp, MlpShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressConfig {
    pub encoder: EncoderChoice,
    /// Spline segment count.
    pub segments: usize,
    pub hidden: usize,
    pub depth: usize,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    /// Lattice resolution per axis for the training samples.
    pub sample_res: usize,
    pub bounds: Aabb,
    pub seed: u64,
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig {
            encoder: EncoderChoice::spline(64, 16),
            segments: 64,
            hidden: 256,
            depth: 4,
            lr: 1e-4,
            steps: 2000,
            batch: 10_000,
            sample_res: 64,
            bounds: Aabb::UNIT,
            seed: 0,
        }
    }
}

impl RegressConfig {
    pub fn validate(&self) -> Result<()> {
        if let EncoderChoice::Spline { channels, projections, .. } = &self.encoder {
            if *channels == 0 || *projections == 0 {
                return Err(Error::invalid("spline encoder needs C >= 1 and M >= 1"));
            }
        }
        if self.segments == 0 || self.batch == 0 || self.sample_res < 2 || !(self.lr > 0.0) {
            return Err(Error::invalid("regression needs K >= 1, batch >= 1, resolution >= 2, lr > 0"));
        }
        MlpShape::new(self.encoder.out_dim(3), self.hidden, self.depth, 1).validate()
    }
}

/// Fits a fresh model to `target` with the L1 loss on minibatches drawn from
/// the lattice. Returns the model and the per-step losses.
pub fn regress_sdf(target: impl Fn(&Point3) -> f64, cfg: &RegressConfig) -> Result<(FieldModel, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, STREAM_INIT);
    let encoder = cfg.encoder.build(3, cfg.segments, &mut rng)?;
    let mlp = Mlp::init_random(MlpShape::new(encoder.out_dim(), cfg.hidden, cfg.depth, 1), &mut rng)?;
    let mut model = FieldModel::new(encoder, mlp)?;

    let grid = ScalarGrid::from_fn([cfg.sample_res; 3], cfg.bounds, &target)?;
    let n = grid.values.len();
    let [_, ny, nz] = grid.res;
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut state = OptimState::new(model.param_count());
    let mut params = model.params();
    let mut rng = stream_rng(cfg.seed, STREAM_FIT);
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut pts = Vec::with_capacity(3 * cfg.batch);
    let mut ys = Vec::with_capacity(cfg.batch);
    for step in 0..cfg.steps {
        pts.clear();
        ys.clear();
        for _ in 0..cfg.batch {
            let idx = rng.random_range(0..n);
            let (i, j, k) = (idx / (ny * nz), (idx / nz) % ny, idx % nz);
            pts.extend_from_slice(&grid.point(i, j, k));
            ys.push(grid.values[idx]);
        }
        let (loss, grads) = l1_regression_grad(&model, &pts, &ys)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                step: step + 1,
                stage_k: cfg.segments,
                detail: "L1 regression loss".into(),
            });
        }
        losses.push(loss);
        adam_step(&mut state, &mut params, &grads.concat(), &adam)?;
        model.set_params(&params)?;
    }
    Ok((model, losses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_decreases_on_sphere() {
        let cfg = RegressConfig {
            encoder: EncoderChoice::spline(8, 4),
            segments: 8,
            hidden: 16,
            depth: 3,
            lr: 3e-3,
            steps: 200,
            batch: 256,
            sample_res: 16,
            ..Default::default()
        };
        let sphere = |p: &Point3| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 0.5;
        let (_, losses) = regress_sdf(sphere, &cfg).unwrap();
        let head: f64 = losses[..20].iter().sum::<f64>() / 20.0;
        let tail: f64 = losses[180..].iter().sum::<f64>() / 20.0;
        assert!(tail < 0.5 * head, "{head} -> {tail}");
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = RegressConfig {
            encoder: EncoderChoice::spline(8, 0),
            ..Default::default()
        };
        assert!(regress_sdf(|_| 0.0, &cfg).is_err());
    }
}
