//! Configuration, training, checkpoints and run-level evaluation.

mod checkpoint;
mod config;
mod evaluate;
mod train;

pub use checkpoint::{load_model, Checkpoint, CHECKPOINT_FORMAT};
pub use config::{
    reference_optimizer, DataConfig, ModelSection, OutputConfig, RunConfig, TrainConfig, DETERMINISTIC_ENV, SCRATCH_LR_SCALE,
};
pub use evaluate::{
    breakdown, check_ablation_pair, compare_reports, compare_syntax_ablation, evaluate_model, evaluate_run,
    length_bucket, predict_examples, predict_instances, predict_pairs, prepare_all, AblationReport, LengthBucket,
    RawPair, RunEvaluation, TypeDelta, LENGTH_BUCKETS,
};
pub use train::{load_parses, train, train_on, EpochRecord, RunReport, TrainData};
