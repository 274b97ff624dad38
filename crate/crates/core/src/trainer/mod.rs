//! Model assembly, optimization, metrics and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod metrics;
pub mod model;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint};
pub use metrics::{compute_metrics, Metrics};
pub use model::{DamModel, Explanation, Hyperparams, ModelVariant, PreparedExample, Recorded};
pub use train::{evaluate, evaluate_prepared, predictions, train, train_with, EpochLog, TrainOptions, TrainOutcome};
