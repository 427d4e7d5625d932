//! Geometric initialization: regress the network onto a sphere's SDF.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointMeta};
use super::model::FieldModel;
use crate::error::{Error, Result};
use crate::training::adam::{adam_step, AdamConfig, OptimState};
use crate::training::loss::l2_grad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub radius: f64,
    pub lr: f64,
    pub batch: usize,
    pub max_steps: usize,
    /// Stop once the mean absolute error on the probe set falls below this.
    pub tolerance: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            radius: 0.5,
            lr: 1e-3,
            batch: 4096,
            max_steps: 5000,
            tolerance: 0.01,
        }
    }
}

const PROBE_POINTS: usize = 4096;
const CHECK_EVERY: usize = 50;

fn uniform_cube<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<f64> {
    (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn sphere_sdf(points: &[f64], dim: usize, r: f64) -> Vec<f64> {
    points
        .chunks(dim)
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt() - r)
        .collect()
}

/// Fits `model` to `‖x‖ − r` by L2 regression on uniform samples of
/// `[-1, 1]^d`. Runs until the probe-set mean absolute error drops below the
/// tolerance or `max_steps` is reached; the checkpoint status is
/// `"converged"` or `"max_steps"` accordingly.
pub fn pretrain_sphere<R: Rng + ?Sized>(mut model: FieldModel, cfg: &PretrainConfig, rng: &mut R) -> Result<Checkpoint> {
    if model.output_dim() != 1 {
        return Err(Error::invalid("sphere pretraining needs a scalar-output model"));
    }
    if !(cfg.radius > 0.0) || cfg.batch == 0 {
        return Err(Error::invalid("sphere pretraining needs radius > 0 and batch > 0"));
    }
    let dim = model.dim();
    let probe = uniform_cube(PROBE_POINTS, dim, rng);
    let probe_sdf = sphere_sdf(&probe, dim, cfg.radius);
    let probe_mae = |m: &FieldModel| -> Result<f64> {
        let f = m.forward_batch(&probe)?;
        Ok(f.iter().zip(&probe_sdf).map(|(a, b)| (a - b).abs()).sum::<f64>() / PROBE_POINTS as f64)
    };
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut state = OptimState::new(model.param_count());
    let mut params = model.params();
    let mut err = probe_mae(&model)?;
    let mut step = 0;
    while err >= cfg.tolerance && step < cfg.max_steps {
        let pts = uniform_cube(cfg.batch, dim, rng);
        let target = sphere_sdf(&pts, dim, cfg.radius);
        let (loss, grads) = l2_grad(&model, &pts, &target)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                step,
                stage_k: 0,
                detail: "sphere pretraining loss".into(),
            });
        }
        adam_step(&mut state, &mut params, &grads.concat(), &adam)?;
        model.set_params(&params)?;
        step += 1;
        if step % CHECK_EVERY == 0 || step == cfg.max_steps {
            err = probe_mae(&model)?;
        }
    }
    let status = if err < cfg.tolerance {
        "converged"
    } else {
        log::warn!(
            "sphere pretraining stopped after {step} steps with mean error {err:.4} (tolerance {})",
            cfg.tolerance
        );
        "max_steps"
    };
    let meta = CheckpointMeta {
        step,
        loss: Some(err),
        timestamp: None,
        status: status.into(),
    };
    let training = serde_json::to_value(cfg).expect("plain config serializes");
    Ok(Checkpoint::from_model(&model, meta).with_training(training))
}
