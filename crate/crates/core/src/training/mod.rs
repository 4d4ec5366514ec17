//! Classifier head, early-stopped training, metrics, multi-seed runs,
//! tagging and checkpoints.

mod checkpoint;
mod config;
mod fit;
mod metrics;
mod model;
mod multiseed;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC, VERSION};
pub use config::{ModelConfig, Monitor, RunConfig, TrainConfig};
pub use fit::{
    evaluate, metrics_for, predict_with_loss, sort_predictions, tag_corpus, train, EarlyStopping, EpochRecord,
    StopDecision, TrainOutcome,
};
pub use metrics::{DegenerateFlags, MetricsReport};
pub use model::{load_predictions, save_predictions, Forward, Model, PredictionRecord};
pub use multiseed::{
    build_model, run_multiseed, run_single, Dataset, Resources, ResultTable, RunOutput, RunReport, SeedAggregate,
    Summary,
};
