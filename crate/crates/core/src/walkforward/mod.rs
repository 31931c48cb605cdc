//! Walk-forward scheduling, per-fold training and out-of-sample prediction.

mod dataset;
mod plan;
mod trainer;

pub use dataset::WindowDataset;
pub use plan::{plan_folds, BatchMode, FoldPlan, InputScaling, PostCapMode, TrainRunConfig};
pub use trainer::{
    fold_seed, predict_fold, train_fold, train_fold_with_hook, walk_forward, walk_forward_with_hook,
    EpochHook, EpochRecord, FoldOutcome, FoldResult,
};
