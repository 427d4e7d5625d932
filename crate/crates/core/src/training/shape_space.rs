//! Auto-decoder training: one shared MLP, one spline encoding per shape.
//!
//! All shapes are optimized by a single Adam over the concatenation
//! `[mlp, encoding_0, encoding_1, ...]`, visiting one shape per step in
//! round-robin order.

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, OptimState};
use super::config::{validate_schedule, EncoderChoice, TrainConfig};
use super::loss::{sdf_loss_grad, sdf_loss_value, LossWeights};
use super::sampling::sample_batches;
use super::sdf::{stream_rng, TrainLog, TrainLogRow, StageSummary, STREAM_FIT, STREAM_INIT, STREAM_PROBE};
use crate::encoding::{Encoder, SplineEncoding};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, PointCloud};
use crate::network::{pretrain_sphere, FieldModel, Mlp, PretrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpaceConfig {
    pub channels: usize,
    pub projections: usize,
    pub degree: usize,
    pub hidden: usize,
    pub depth: usize,
    pub lambda: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_points: usize,
    /// Ends at the final per-shape K.
    pub k_schedule: Vec<usize>,
    /// Total steps per stage, shared across shapes.
    pub steps_per_stage: Vec<usize>,
    pub bbox: Aabb,
    pub sphere_init: Option<PretrainConfig>,
    pub probe_points: usize,
    pub seed: u64,
}

impl Default for ShapeSpaceConfig {
    fn default() -> Self {
        ShapeSpaceConfig {
            channels: 32,
            projections: 3,
            degree: 1,
            hidden: 256,
            depth: 4,
            lambda: 0.1,
            tau: 1.0,
            lr: 1e-4,
            batch_points: 10_000,
            k_schedule: vec![2, 8, 32, 64],
            steps_per_stage: vec![500, 1000, 1000, 1000],
            bbox: Aabb::UNIT,
            sphere_init: Some(PretrainConfig::default()),
            probe_points: 2048,
            seed: 0,
        }
    }
}

impl ShapeSpaceConfig {
    pub fn validate(&self) -> Result<()> {
        self.as_train_config().validate()
    }

    fn weights(&self) -> LossWeights {
        LossWeights {
            lambda: self.lambda,
            tau: self.tau,
        }
    }

    /// The equivalent single-shape configuration, used for validation and
    /// initialization.
    pub fn as_train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            tau: self.tau,
            lr: self.lr,
            batch_points: self.batch_points,
            k_schedule: self.k_schedule.clone(),
            steps_per_stage: self.steps_per_stage.clone(),
            seed: self.seed,
            encoder: EncoderChoice::Spline {
                channels: self.channels,
                projections: self.projections,
                degree: self.degree,
                domain_radius: None,
                freeze_directions: false,
            },
            hidden: self.hidden,
            depth: self.depth,
            bbox: self.bbox,
            sphere_init: self.sphere_init.clone(),
            probe_points: self.probe_points,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpace {
    pub mlp: Mlp,
    pub encodings: Vec<SplineEncoding>,
    /// Starting encoding for every shape, at the first scheduled K.
    pub init_encoding: SplineEncoding,
    pub config: ShapeSpaceConfig,
}

impl ShapeSpace {
    pub fn len(&self) -> usize {
        self.encodings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encodings.is_empty()
    }

    /// The field of shape `i`.
    pub fn model(&self, i: usize) -> Result<FieldModel> {
        let enc = self
            .encodings
            .get(i)
            .ok_or_else(|| Error::invalid(format!("no shape {i} in a space of {}", self.len())))?;
        self.model_with(enc.clone())
    }

    pub fn model_with(&self, encoding: SplineEncoding) -> Result<FieldModel> {
        FieldModel::new(Encoder::Spline(encoding), self.mlp.clone())
    }
}

fn refine_all(encs: &mut [SplineEncoding], k: usize) {
    for e in encs {
        while e.segments() < k {
            *e = e.refine();
        }
    }
}

/// Jointly trains the shared MLP and one encoding per cloud.
pub fn train_shape_space(clouds: &[PointCloud], cfg: &ShapeSpaceConfig) -> Result<(ShapeSpace, Vec<TrainLog>)> {
    cfg.validate()?;
    if clouds.len() < 2 {
        return Err(Error::invalid("shape space training needs at least two shapes"));
    }
    let tc = cfg.as_train_config();
    let mut rng = stream_rng(cfg.seed, STREAM_INIT);
    let mut model = tc.initial_model(3, &mut rng)?;
    if let Some(init) = &cfg.sphere_init {
        model = pretrain_sphere(model, init, &mut rng)?.to_model()?;
    }
    let FieldModel { encoder, mut mlp } = model;
    let Encoder::Spline(init_encoding) = encoder else {
        unreachable!("shape space uses spline encoders")
    };
    let mut encs = vec![init_encoding.clone(); clouds.len()];
    let weights = cfg.weights();
    let adam = tc.adam();
    let probes = clouds
        .iter()
        .enumerate()
        .map(|(i, pc)| sample_batches(pc, &cfg.bbox, cfg.probe_points, &mut stream_rng(cfg.seed, STREAM_PROBE + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut logs = vec![TrainLog::default(); clouds.len()];
    let mut rng = stream_rng(cfg.seed, STREAM_FIT);
    let mut global = 0;

    for (stage, (&k, &steps)) in cfg.k_schedule.iter().zip(&cfg.steps_per_stage).enumerate() {
        let probe_all = |mlp: &Mlp, encs: &[SplineEncoding]| -> Result<Vec<f64>> {
            encs.iter()
                .zip(&probes)
                .map(|(e, p)| {
                    let m = FieldModel::new(Encoder::Spline(e.clone()), mlp.clone())?;
                    Ok(sdf_loss_value(&m, p, &weights)?.total)
                })
                .collect()
        };
        let (mut before, mut after) = (None, None);
        if stage > 0 {
            before = Some(probe_all(&mlp, &encs)?);
            refine_all(&mut encs, k);
            after = Some(probe_all(&mlp, &encs)?);
        }
        let start = match &after {
            Some(a) => a.clone(),
            None => probe_all(&mlp, &encs)?,
        };
        let n_mlp = mlp.param_count();
        let n_enc = encs[0].param_count();
        let mut params = mlp.params();
        for e in &encs {
            params.extend(e.params());
        }
        let mut state = OptimState::new(params.len());
        let mut grads = vec![0.0; params.len()];
        for _ in 0..steps {
            let s = global % clouds.len();
            global += 1;
            let batch = sample_batches(&clouds[s], &cfg.bbox, cfg.batch_points, &mut rng)?;
            let m = FieldModel::new(Encoder::Spline(encs[s].clone()), mlp.clone())?;
            let (terms, g) = sdf_loss_grad(&m, &batch, &weights)?;
            if !terms.is_finite() {
                return Err(Error::NonFinite {
                    step: global,
                    stage_k: k,
                    detail: format!("shape {s}"),
                });
            }
            logs[s].rows.push(TrainLogRow {
                step: global,
                stage_k: k,
                loss: terms.total,
                eikonal: terms.eikonal,
                fit: terms.fit,
                normal: terms.normal,
            });
            grads.iter_mut().for_each(|v| *v = 0.0);
            grads[..n_mlp].copy_from_slice(&g.mlp);
            let off = n_mlp + s * n_enc;
            grads[off..off + n_enc].copy_from_slice(&g.encoder);
            adam_step(&mut state, &mut params, &grads, &adam)?;
            mlp.set_params(&params[..n_mlp])?;
            for (i, e) in encs.iter_mut().enumerate() {
                let o = n_mlp + i * n_enc;
                e.set_params(&params[o..o + n_enc])?;
            }
        }
        let end = probe_all(&mlp, &encs)?;
        for (i, log) in logs.iter_mut().enumerate() {
            log.stages.push(StageSummary {
                k,
                steps,
                before_refine: before.as_ref().map(|b| b[i]),
                after_refine: after.as_ref().map(|a| a[i]),
                start_loss: start[i],
                end_loss: end[i],
            });
        }
        log::info!("shape space stage {stage} (K = {k}): probe losses {end:?}");
    }
    let space = ShapeSpace {
        mlp,
        encodings: encs,
        init_encoding,
        config: cfg.clone(),
    };
    Ok((space, logs))
}

/// Fits a new encoding with the shared MLP frozen, following the space's
/// K schedule from its initial encoding. `steps_per_stage` overrides the
/// space's own step counts when given.
pub fn fit_new_shape(
    space: &ShapeSpace,
    pc: &PointCloud,
    steps_per_stage: Option<&[usize]>,
    seed: u64,
) -> Result<(SplineEncoding, TrainLog)> {
    let cfg = &space.config;
    validate_schedule(&cfg.k_schedule)?;
    let steps = steps_per_stage.unwrap_or(&cfg.steps_per_stage);
    if steps.len() != cfg.k_schedule.len() {
        return Err(Error::invalid("one step count per stage is required"));
    }
    let weights = cfg.weights();
    let adam = AdamConfig {
        lr: cfg.lr,
        ..Default::default()
    };
    let probe = sample_batches(pc, &cfg.bbox, cfg.probe_points, &mut stream_rng(seed, STREAM_PROBE))?;
    let mut rng = stream_rng(seed, STREAM_FIT);
    let mut model = space.model_with(space.init_encoding.clone())?;
    let mut log = TrainLog::default();
    let mut global = 0;
    for (stage, (&k, &n)) in cfg.k_schedule.iter().zip(steps).enumerate() {
        let (mut before, mut after) = (None, None);
        if stage > 0 {
            before = Some(sdf_loss_value(&model, &probe, &weights)?.total);
            super::sdf::refine_to(&mut model, k)?;
            after = Some(sdf_loss_value(&model, &probe, &weights)?.total);
        }
        let start_loss = sdf_loss_value(&model, &probe, &weights)?.total;
        let mut params = model.encoder.params();
        let mut state = OptimState::new(params.len());
        for _ in 0..n {
            global += 1;
            let batch = sample_batches(pc, &cfg.bbox, cfg.batch_points, &mut rng)?;
            let (terms, g) = sdf_loss_grad(&model, &batch, &weights)?;
            if !terms.is_finite() {
                return Err(Error::NonFinite {
                    step: global,
                    stage_k: k,
                    detail: "new shape fit".into(),
                });
            }
            log.rows.push(TrainLogRow {
                step: global,
                stage_k: k,
                loss: terms.total,
                eikonal: terms.eikonal,
                fit: terms.fit,
                normal: terms.normal,
            });
            adam_step(&mut state, &mut params, &g.encoder, &adam)?;
            model.encoder.set_params(&params)?;
        }
        let end_loss = sdf_loss_value(&model, &probe, &weights)?.total;
        log.stages.push(StageSummary {
            k,
            steps: n,
            before_refine: before,
            after_refine: after,
            start_loss,
            end_loss,
        });
    }
    let Encoder::Spline(enc) = model.encoder else {
        unreachable!("shape space uses spline encoders")
    };
    Ok((enc, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnalyticShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ShapeSpaceConfig {
        ShapeSpaceConfig {
            channels: 6,
            hidden: 12,
            depth: 3,
            lr: 1e-3,
            batch_points: 64,
            k_schedule: vec![2, 4],
            steps_per_stage: vec![10, 10],
            sphere_init: Some(PretrainConfig {
                batch: 128,
                max_steps: 30,
                ..Default::default()
            }),
            probe_points: 64,
            ..Default::default()
        }
    }

    fn sphere(r: f64, seed: u64) -> PointCloud {
        AnalyticShape::sphere(r)
            .unwrap()
            .sample_surface(300, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn trains_and_refits_with_frozen_mlp() {
        let clouds = [sphere(0.3, 1), sphere(0.5, 2)];
        let (space, logs) = train_shape_space(&clouds, &tiny()).unwrap();
        assert_eq!(space.len(), 2);
        assert_eq!(logs[0].rows.len() + logs[1].rows.len(), 20);
        assert!(space.encodings.iter().all(|e| e.segments() == 4));
        assert_eq!(space.init_encoding.segments(), 2);
        let mlp_before = space.mlp.params();
        let (enc, log) = fit_new_shape(&space, &sphere(0.4, 3), None, 7).unwrap();
        assert_eq!(enc.segments(), 4);
        assert_eq!(log.rows.len(), 20);
        assert_eq!(space.mlp.params(), mlp_before);
    }

    #[test]
    fn mlp_size_independent_of_shape_count() {
        let two = train_shape_space(&[sphere(0.3, 1), sphere(0.5, 2)], &tiny()).unwrap().0;
        let three = train_shape_space(&[sphere(0.3, 1), sphere(0.5, 2), sphere(0.4, 3)], &tiny())
            .unwrap()
            .0;
        assert_eq!(two.mlp.param_count(), three.mlp.param_count());
    }

    #[test]
    fn needs_two_shapes() {
        assert!(train_shape_space(&[sphere(0.3, 1)], &tiny()).is_err());
    }
}
