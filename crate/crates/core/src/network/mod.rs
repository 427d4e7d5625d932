//! The Softplus field network, its batched derivative passes, and checkpoints.

mod checkpoint;
mod mlp;
mod model;
mod pass;
mod pretrain;

pub use checkpoint::{Checkpoint, CheckpointConfig, CheckpointMeta, CHECKPOINT_VERSION};
pub use mlp::{sigmoid, softplus, Layer, Mlp, MlpShape};
pub use model::{FieldModel, ModelSpec, ParamBlock, Upstream};
pub use pass::{ForwardPass, SplitGrads};
pub use pretrain::{pretrain_sphere, PretrainConfig};
