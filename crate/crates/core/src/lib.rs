//! Query-focused video summarization with a convolutional hierarchical
//! attention network.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: reverse-mode autodiff engine plus [`optim`] and [`gradcheck`]
//! * [`segmentation`]: kernel temporal segmentation of shot sequences
//! * [`model`]: the network, its training loop and summary selection
//! * [`evaluation`]: concept-overlap bipartite matching metrics
//! * [`dataset`]: file formats, synthetic data and the fold protocol
//! * [`experiment`]: a seeded train-and-evaluate run and its config
//! * [`selfcheck`]: finite-difference checks of every op and the network

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod gradcheck;
pub mod init;
pub mod model;
pub mod optim;
pub mod segmentation;
pub mod selfcheck;
pub mod tensor;

pub use error::{ChanError, Result};
pub use gradcheck::{gradient_check, GradcheckOptions, GradcheckReport};
pub use optim::{AdamConfig, AdamState};
pub use tensor::{Gradients, Padding, Tape, Tensor, Var};

pub use dataset::{ConceptId, ConceptVocabulary, Dataset, Query, ShotFeatureSequence, Summary, VideoRecord};
pub use experiment::{run_experiment, RunConfig, RunReport};
pub use evaluation::{evaluate_dataset, evaluate_summary, MatchReport, MetricsTable, Prf, ShotConceptSets};
pub use model::{ChanConfig, ChanModel, SelectionPolicy, SummaryResult, TrainConfig};
pub use segmentation::{kts_segment, KtsConfig, SegmentBoundaries};
