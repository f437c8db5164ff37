//! Optimisation: Adam, warmup + cosine schedule, early stopping, trials.

mod adam;
mod config;
mod schedule;
mod stopping;
mod trainer;

pub use adam::{adam_step, OptimizerState};
pub use config::TrainConfig;
pub use schedule::lr_at;
pub use stopping::{EarlyStopping, StopDecision};
pub use trainer::{run_trials, mean_l1, train_one, EpochLog, EpochSink, SplitData, TrialSink, TrialResult, TrialsOutcome};
