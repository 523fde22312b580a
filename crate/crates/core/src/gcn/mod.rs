//! Graph convolutional slide classifier.
//!
//! Per graph: `L` graph convolutions `H = Dropout(ReLU(Â X W))`, a global
//! mean pool of every layer's post-ReLU representation, the pooled vectors
//! concatenated, a stack of `Dropout(ReLU(W z + b))` linear layers and a
//! softmax output layer. Gradients are derived by hand and checked against
//! finite differences in the test suite.

mod adam;
mod adjacency;
mod checkpoint;
mod model;
mod standardize;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use adjacency::NormalizedAdjacency;
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use model::{cross_entropy_loss, softmax, Architecture, ForwardCache, GcnModel, Mode, Params};
pub use standardize::Standardizer;
pub use train::{evaluate, train, Classifier, EpochStats, Evaluation, TrainConfig, TrainOutcome};
