use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use super::loss::LossWeights;
use crate::encoding::{fourier::DEFAULT_SIGMA, Encoder, FourierEncoding, SplineConfig, SplineEncoding};
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::network::{FieldModel, Mlp, MlpShape, ModelSpec, PretrainConfig};

/// Which positional encoding feeds the MLP. The spline segment count comes
/// from the first entry of the K schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderChoice {
    Spline {
        channels: usize,
        projections: usize,
        degree: usize,
        /// Spline domain half-width; `None` means `sqrt(d)`.
        domain_radius: Option<f64>,
        freeze_directions: bool,
    },
    Fourier {
        frequencies: usize,
        sigma: f64,
    },
    Identity,
}

impl EncoderChoice {
    pub fn spline(channels: usize, projections: usize) -> Self {
        EncoderChoice::Spline {
            channels,
            projections,
            degree: 1,
            domain_radius: None,
            freeze_directions: false,
        }
    }

    pub fn fourier(frequencies: usize) -> Self {
        EncoderChoice::Fourier {
            frequencies,
            sigma: DEFAULT_SIGMA,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EncoderChoice::Spline { .. } => "spe",
            EncoderChoice::Fourier { .. } => "fpe",
            EncoderChoice::Identity => "identity",
        }
    }

    pub fn is_spline(&self) -> bool {
        matches!(self, EncoderChoice::Spline { .. })
    }

    /// Builds a fresh encoder. Spline weights and directions, and Fourier
    /// frequencies, are drawn from `rng`.
    pub fn build<R: Rng + ?Sized>(&self, dim: usize, segments: usize, rng: &mut R) -> Result<Encoder> {
        Ok(match self {
            EncoderChoice::Spline {
                channels,
                projections,
                degree,
                domain_radius,
                freeze_directions,
            } => {
                let mut cfg = SplineConfig::new(dim, segments, *channels, *projections);
                cfg.degree = *degree;
                cfg.domain_radius = *domain_radius;
                cfg.freeze_directions = *freeze_directions;
                Encoder::Spline(SplineEncoding::new(cfg, rng)?)
            }
            EncoderChoice::Fourier { frequencies, sigma } => {
                Encoder::Fourier(FourierEncoding::random(dim, *frequencies, *sigma, rng)?)
            }
            EncoderChoice::Identity => Encoder::identity(dim),
        })
    }

    pub fn out_dim(&self, dim: usize) -> usize {
        match self {
            EncoderChoice::Spline { channels, .. } => *channels,
            EncoderChoice::Fourier { frequencies, .. } => 2 * frequencies,
            EncoderChoice::Identity => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Eikonal weight.
    pub lambda: f64,
    /// Normal alignment weight.
    pub tau: f64,
    pub lr: f64,
    /// Surface samples per step; the same number of domain samples is drawn.
    pub batch_points: usize,
    /// Segment counts per stage. Each entry is a power-of-two multiple of the
    /// previous one.
    pub k_schedule: Vec<usize>,
    /// Adam steps per stage, same length as `k_schedule`.
    pub steps_per_stage: Vec<usize>,
    pub seed: u64,
    pub encoder: EncoderChoice,
    pub hidden: usize,
    /// Number of fully-connected layers.
    pub depth: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Domain for Eikonal samples.
    pub bbox: Aabb,
    /// `None` starts from a random network.
    pub sphere_init: Option<PretrainConfig>,
    /// Size of the fixed batch used to report loss at stage boundaries.
    pub probe_points: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.1,
            tau: 1.0,
            lr: 1e-4,
            batch_points: 10_000,
            k_schedule: vec![2, 8, 32, 128, 256],
            steps_per_stage: vec![500, 1000, 1000, 1000, 1000],
            seed: 0,
            encoder: EncoderChoice::spline(64, 3),
            hidden: 256,
            depth: 4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            bbox: Aabb::UNIT,
            sphere_init: Some(PretrainConfig::default()),
            probe_points: 2048,
        }
    }
}

/// Stage step counts for a schedule: 500 for the first stage, 1000 after.
pub fn default_steps(stages: usize) -> Vec<usize> {
    (0..stages).map(|s| if s == 0 { 500 } else { 1000 }).collect()
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        validate_schedule(&self.k_schedule)?;
        if self.steps_per_stage.len() != self.k_schedule.len() {
            return Err(Error::invalid(format!(
                "{} stage step counts for {} stages",
                self.steps_per_stage.len(),
                self.k_schedule.len()
            )));
        }
        for (name, v) in [("lambda", self.lambda), ("tau", self.tau)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_points == 0 || self.probe_points == 0 {
            return Err(Error::invalid("batch and probe sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::invalid("Adam betas must lie in [0, 1) and eps must be positive"));
        }
        match &self.encoder {
            EncoderChoice::Spline {
                channels, projections, ..
            } if *channels == 0 || *projections == 0 => {
                return Err(Error::invalid("spline encoder needs C >= 1 and M >= 1"));
            }
            EncoderChoice::Fourier { frequencies, sigma } if *frequencies == 0 || *sigma <= 0.0 => {
                return Err(Error::invalid("Fourier encoder needs at least one frequency and sigma > 0"));
            }
            _ => {}
        }
        if let Some(init) = &self.sphere_init {
            if !(init.radius > 0.0) || init.batch == 0 || !(init.lr > 0.0) {
                return Err(Error::invalid("sphere init needs positive radius, batch and lr"));
            }
        }
        self.mlp_shape(3).validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda: self.lambda,
            tau: self.tau,
        }
    }

    pub fn mlp_shape(&self, dim: usize) -> MlpShape {
        MlpShape::new(self.encoder.out_dim(dim), self.hidden, self.depth, 1)
    }

    /// Randomly initialized model at the first stage's K.
    pub fn initial_model<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Result<FieldModel> {
        let encoder = self.encoder.build(dim, self.k_schedule[0], rng)?;
        let mlp = Mlp::init_random(self.mlp_shape(dim), rng)?;
        FieldModel::new(encoder, mlp)
    }

    pub fn initial_spec<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Result<ModelSpec> {
        Ok(self.initial_model(dim, rng)?.spec())
    }
}

/// Non-empty, strictly increasing, and each K a power-of-two multiple of the
/// previous.
pub fn validate_schedule(schedule: &[usize]) -> Result<()> {
    let first = *schedule
        .first()
        .ok_or_else(|| Error::invalid("K schedule must not be empty"))?;
    if first == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    for w in schedule.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 || !(w[1] / w[0]).is_power_of_two() {
            return Err(Error::invalid(format!(
                "K schedule step {} -> {} is not a power-of-two increase",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}
