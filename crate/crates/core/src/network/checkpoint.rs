use serde::{Deserialize, Serialize};

use super::model::{FieldModel, ModelSpec, ParamBlock};
use crate::error::{Error, Result};
use crate::geometry::Similarity;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized model plus enough configuration to reproduce the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: CheckpointConfig,
    pub param_order: Vec<ParamBlock>,
    pub params: Vec<f64>,
    pub meta: CheckpointMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub model: ModelSpec,
    /// Echo of the training hyper-parameters, free-form.
    #[serde(default)]
    pub training: serde_json::Value,
    /// Map from input coordinates to the model's normalized frame.
    #[serde(default)]
    pub normalization: Option<Similarity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: usize,
    pub loss: Option<f64>,
    /// Seconds since the Unix epoch. Left unset by the library so repeated
    /// runs serialize identically.
    #[serde(default)]
    pub timestamp: Option<u64>,
    pub status: String,
}

impl Default for CheckpointMeta {
    fn default() -> Self {
        CheckpointMeta {
            step: 0,
            loss: None,
            timestamp: None,
            status: "ok".into(),
        }
    }
}

impl Checkpoint {
    pub fn from_model(model: &FieldModel, meta: CheckpointMeta) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: CheckpointConfig {
                model: model.spec(),
                training: serde_json::Value::Null,
                normalization: None,
            },
            param_order: model.param_order(),
            params: model.params(),
            meta,
        }
    }

    pub fn with_training(mut self, training: serde_json::Value) -> Self {
        self.config.training = training;
        self
    }

    pub fn with_normalization(mut self, t: Option<Similarity>) -> Self {
        self.config.normalization = t;
        self
    }

    pub fn to_model(&self) -> Result<FieldModel> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint format_version {}",
                self.format_version
            )));
        }
        let model = FieldModel::from_spec(&self.config.model, &self.params)?;
        if model.param_order() != self.param_order {
            return Err(Error::invalid("param_order does not match the model spec"));
        }
        Ok(model)
    }
}
