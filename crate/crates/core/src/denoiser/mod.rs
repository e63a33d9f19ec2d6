//! Noise predictor, its training loop and checkpoint format.

mod checkpoint;
mod model;
mod net;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{DenoiserModel, LatentSceneState};
pub use net::{time_embedding, DenoiserNet, ForwardPass, GatLayer, Mlp, NetConfig};
pub use train::{train, training_loss, training_loss_value, TrainConfig, TrainingExample};
