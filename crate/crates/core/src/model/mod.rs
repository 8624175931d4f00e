//! The network, its training loop, summary selection and checkpoints.

mod checkpoint;
mod config;
mod network;
mod params;
mod select;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, ParamEntry, CHECKPOINT_VERSION};
pub use config::{ChanConfig, SelectionPolicy};
pub use network::{Attention, Bound, ChanModel, QueryEmbedding, SegmentEncoding, VideoEncoding};
pub use params::{AffineIdx, AttentionIdx, ChanParams, Layout, LocalIdx, ParamSpec};
pub use select::{select_shots, SummaryResult};
pub use train::{
    evaluate_model, fit, predict_summaries, segment_dataset, shot_labels, summarize_video, EpochRecord, LabelMode,
    StepRecord, TrainConfig, TrainOutcome,
};
