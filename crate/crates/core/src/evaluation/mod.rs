//! Semantic summary evaluation: shots are compared by the overlap of their
//! annotated concepts, candidate and reference summaries are aligned by a
//! maximum-weight bipartite matching, and matched-pair counts give
//! precision, recall and F1.

mod matching;
mod metrics;

pub use matching::{max_weight_matching, total_weight, MatchedPair};
pub use metrics::{
    concept_iou, evaluate_dataset, evaluate_summary, MatchReport, MetricsTable, Prf, ShotConceptSets, VideoMetrics,
};
