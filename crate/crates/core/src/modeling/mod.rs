//! Annotator-modeling techniques as trainable heads over frozen text
//! embeddings.

mod composite;
mod config;
mod evaluate;
mod model;
mod network;
mod train;

pub use composite::{compute_composites, CompositeStore};
pub use config::{Technique, TechniqueConfig};
pub use evaluate::{evaluate, evaluate_with_embeddings, predict_split, split_gold};
pub use model::{TrainedModel, CHECKPOINT_VERSION};
pub use network::{Network, Sample, TrainingSet};
pub use train::{embed_bundle, train, train_with_embeddings, training_set};
