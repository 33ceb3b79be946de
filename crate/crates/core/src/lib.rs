//! Knowledge-graph embeddings built from Householder transformations.
//!
//! Each relation rotates head-entity blocks with a chain of Householder
//! reflections and optionally rescales both sides with modified reflections
//! (projections) before comparing. The crate covers the linear-algebra
//! kernel, the model, hand-written gradients and Adam training, filtered
//! ranking evaluation, dataset loading, synthetic graphs, checkpoints and a
//! command-line tool (`housekge`).

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod evaluator;
pub mod gradients;
pub mod householder;
pub mod loss;
pub mod model;
pub mod optimizer;
pub mod properties;
pub mod sampling;
pub mod synth;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use data::{build_filter_index, classify_rmp, load_dataset, FilterIndex, Triple, TripleStore, Vocab};
pub use evaluator::{evaluate, filtered_rank, MetricsReport, RankResult};
pub use gradients::{loss_gradients, Batch, GradientSet, LossSettings, Regularization};
pub use model::{init_parameters, HouseModel, ModelConfig, ModelError, Side, Variant};
pub use optimizer::{adam_step, AdamConfig, OptimizerState};
pub use trainer::{train, TrainConfig, TrainError, TrainOutcome};
