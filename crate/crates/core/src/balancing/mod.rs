//! Loss family (baseline, IMBA, inverse frequency) and the training loop.

mod config;
mod loss;
mod stats;
mod step;
mod train;

pub use config::{LossConfig, LossKind, WeightMode};
pub use loss::{baseline_loss, imba_distance, imba_weights};
pub use stats::ConceptStats;
pub use step::{
    baseline_step, freq_weighted_step, imba_step, imba_step_with_weights, loss_step, StepReport,
};
pub use train::{train, LogRow, LrSchedule, TrainConfig, TrainError, TrainLog};
