//! Multiscale SDF fitting from an oriented point cloud.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, OptimState};
use super::config::TrainConfig;
use super::loss::{sdf_loss_grad, sdf_loss_value, LossTerms, SdfBatch};
use super::sampling::sample_batches;
use crate::encoding::Encoder;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::network::{pretrain_sphere, Checkpoint, CheckpointMeta, FieldModel};

/// Random streams derived from the seed. Initialization and fitting use
/// separate streams so a cached initialization reproduces an inline one.
pub(crate) const STREAM_INIT: u64 = 0;
pub(crate) const STREAM_FIT: u64 = 1;
pub(crate) const STREAM_PROBE: u64 = 2;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    /// Global step, counted from 1.
    pub step: usize,
    pub stage_k: usize,
    pub loss: f64,
    pub eikonal: f64,
    pub fit: f64,
    pub normal: f64,
}

/// Probe-batch losses around one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub k: usize,
    pub steps: usize,
    /// Before and after the refinement that opened this stage.
    pub before_refine: Option<f64>,
    pub after_refine: Option<f64>,
    pub start_loss: f64,
    pub end_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
    pub stages: Vec<StageSummary>,
    /// Status of the sphere initialization, when one ran.
    pub init_status: Option<String>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "step,stage_K,loss,eikonal_term,fit_term,normal_term";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{:e}",
                r.step, r.stage_k, r.loss, r.eikonal, r.fit, r.normal
            )?;
        }
        Ok(())
    }
}

/// Doubles the spline segment count until it reaches `k`. No-op for other
/// encoders.
pub fn refine_to(model: &mut FieldModel, k: usize) -> Result<()> {
    if let Encoder::Spline(s) = &mut model.encoder {
        if k < s.segments() || k % s.segments() != 0 || !(k / s.segments()).is_power_of_two() {
            return Err(Error::invalid(format!(
                "cannot refine from K = {} to K = {k}",
                s.segments()
            )));
        }
        while s.segments() < k {
            *s = s.refine();
        }
    }
    Ok(())
}

fn stage_k(model: &FieldModel) -> usize {
    model.encoder.as_spline().map_or(0, |s| s.segments())
}

/// The starting model of a fit: random weights on the init stream, then
/// sphere pretraining when configured. Saving this checkpoint and passing
/// its model to [`train_sdf_from`] reproduces [`train_sdf`] exactly.
pub fn initialize(cfg: &TrainConfig) -> Result<Checkpoint> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, STREAM_INIT);
    let model = cfg.initial_model(3, &mut rng)?;
    match &cfg.sphere_init {
        Some(init) => {
            let ck = pretrain_sphere(model, init, &mut rng)?;
            log::info!(
                "sphere init: {} after {} steps (mean error {:.4})",
                ck.meta.status,
                ck.meta.step,
                ck.meta.loss.unwrap_or(f64::NAN)
            );
            Ok(ck)
        }
        None => Ok(Checkpoint::from_model(
            &model,
            CheckpointMeta {
                status: "random".into(),
                ..Default::default()
            },
        )),
    }
}

/// [`initialize`] followed by [`train_sdf_from`].
pub fn train_sdf(pc: &PointCloud, cfg: &TrainConfig) -> Result<(FieldModel, TrainLog)> {
    let ck = initialize(cfg)?;
    let (model, mut log) = train_sdf_from(ck.to_model()?, pc, cfg)?;
    log.init_status = Some(ck.meta.status);
    Ok((model, log))
}

/// Runs the K schedule starting from `model`, whose segment count must equal
/// the first scheduled K. Adam state is reset at every stage.
pub fn train_sdf_from(mut model: FieldModel, pc: &PointCloud, cfg: &TrainConfig) -> Result<(FieldModel, TrainLog)> {
    cfg.validate()?;
    if model.dim() != 3 || model.output_dim() != 1 {
        return Err(Error::invalid("SDF fitting needs a 3D scalar model"));
    }
    if let Some(s) = model.encoder.as_spline() {
        if s.segments() != cfg.k_schedule[0] {
            return Err(Error::invalid(format!(
                "initial model has K = {} but the schedule starts at {}",
                s.segments(),
                cfg.k_schedule[0]
            )));
        }
    }
    let weights = cfg.weights();
    let adam = cfg.adam();
    let probe = sample_batches(pc, &cfg.bbox, cfg.probe_points, &mut stream_rng(cfg.seed, STREAM_PROBE))?;
    let probe_loss = |m: &FieldModel| sdf_loss_value(m, &probe, &weights).map(|t| t.total);
    let mut rng = stream_rng(cfg.seed, STREAM_FIT);
    let mut log = TrainLog::default();
    let mut global = 0;

    for (stage, (&k, &steps)) in cfg.k_schedule.iter().zip(&cfg.steps_per_stage).enumerate() {
        let (mut before_refine, mut after_refine) = (None, None);
        if stage > 0 && model.encoder.as_spline().is_some() {
            before_refine = Some(probe_loss(&model)?);
            refine_to(&mut model, k)?;
            after_refine = Some(probe_loss(&model)?);
        }
        let start_loss = after_refine.map_or_else(|| probe_loss(&model), Ok)?;
        let mut params = model.params();
        let mut state = OptimState::new(params.len());
        for _ in 0..steps {
            global += 1;
            let batch: SdfBatch = sample_batches(pc, &cfg.bbox, cfg.batch_points, &mut rng)?;
            let (terms, grads): (LossTerms, _) = sdf_loss_grad(&model, &batch, &weights)?;
            if !terms.is_finite() {
                return Err(Error::NonFinite {
                    step: global,
                    stage_k: stage_k(&model),
                    detail: format!(
                        "fit {} normal {} eikonal {}",
                        terms.fit, terms.normal, terms.eikonal
                    ),
                });
            }
            log.rows.push(TrainLogRow {
                step: global,
                stage_k: stage_k(&model),
                loss: terms.total,
                eikonal: terms.eikonal,
                fit: terms.fit,
                normal: terms.normal,
            });
            adam_step(&mut state, &mut params, &grads.concat(), &adam)?;
            model.set_params(&params)?;
        }
        let end_loss = probe_loss(&model)?;
        log::info!(
            "stage {stage} (K = {}): probe loss {start_loss:.5} -> {end_loss:.5} over {steps} steps",
            stage_k(&model)
        );
        log.stages.push(StageSummary {
            k: stage_k(&model),
            steps,
            before_refine,
            after_refine,
            start_loss,
            end_loss,
        });
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnalyticShape;
    use crate::network::PretrainConfig;
    use crate::training::config::EncoderChoice;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            batch_points: 128,
            k_schedule: vec![2, 8],
            steps_per_stage: vec![15, 15],
            encoder: EncoderChoice::spline(8, 3),
            hidden: 16,
            depth: 3,
            lr: 1e-3,
            probe_points: 256,
            sphere_init: Some(PretrainConfig {
                batch: 256,
                max_steps: 60,
                ..Default::default()
            }),
            ..Default::default()
        }
    }

    fn cloud() -> PointCloud {
        AnalyticShape::sphere(0.5)
            .unwrap()
            .sample_surface(500, &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn runs_schedule_and_logs() {
        let cfg = tiny_config();
        let (m, log) = train_sdf(&cloud(), &cfg).unwrap();
        assert_eq!(m.encoder.as_spline().unwrap().segments(), 8);
        assert_eq!(log.rows.len(), 30);
        assert_eq!(log.rows[0].stage_k, 2);
        assert_eq!(log.rows[29].stage_k, 8);
        assert_eq!(log.stages.len(), 2);
        let s1 = log.stages[1];
        assert!((s1.before_refine.unwrap() - s1.after_refine.unwrap()).abs() <= 1e-9);
        assert!(log.init_status.is_some());
        let mut csv = Vec::new();
        log.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 31);
        assert!(text.starts_with(TrainLog::CSV_HEADER));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = tiny_config();
        let (a, la) = train_sdf(&cloud(), &cfg).unwrap();
        let (b, lb) = train_sdf(&cloud(), &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(la, lb);
    }

    #[test]
    fn rejects_mismatched_start() {
        let cfg = tiny_config();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = cfg.initial_model(3, &mut rng).unwrap();
        refine_to(&mut m, 4).unwrap();
        assert!(train_sdf_from(m, &cloud(), &cfg).is_err());
    }

    #[test]
    fn refine_to_rejects_non_power_of_two() {
        let cfg = tiny_config();
        let mut m = cfg.initial_model(3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(refine_to(&mut m, 6).is_err());
        assert!(refine_to(&mut m, 1).is_err());
        refine_to(&mut m, 16).unwrap();
        assert_eq!(m.encoder.as_spline().unwrap().segments(), 16);
    }

    #[test]
    fn non_spline_encoders_train() {
        let mut cfg = tiny_config();
        cfg.encoder = EncoderChoice::fourier(4);
        cfg.sphere_init = None;
        let (_, log) = train_sdf(&cloud(), &cfg).unwrap();
        assert!(log.rows.iter().all(|r| r.stage_k == 0 && r.loss.is_finite()));
    }
}
