//! Data formats, loaders, the fold protocol and a synthetic generator.

mod features;
mod manifest;
mod split;
mod synth;
mod vocab;

pub use features::{load_features, save_features, ShotFeatureSequence, FEATURE_MAGIC};
pub use manifest::{
    read_summaries, summaries_from_file, summary_file, write_summaries, AnnotationFile, Dataset, ManifestFile,
    Summary, SummaryEntry, SummaryFile, VideoEntry, VideoRecord, FORMAT_VERSION, MANIFEST_FILE, SHOT_SECONDS,
};
pub(crate) use manifest::{read_json, write_json};
pub use split::{split_protocol, Split};
pub use synth::{synth_generate, SynthConfig, CONCEPT_NAMES};
pub use vocab::{ConceptId, ConceptVocabulary, Query};
