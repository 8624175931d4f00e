//! Flags. Every config-backed flag overrides the matching field of the
//! `--config` file, which in turn overrides the built-in defaults.

use std::path::PathBuf;

use chan_core::dataset::SynthConfig;
use chan_core::model::LabelMode;
use chan_core::{KtsConfig, RunConfig, SelectionPolicy};
use clap::{Args, ValueEnum};

fn set<T: Clone>(field: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *field = v.clone();
    }
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON generator config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_videos: Option<usize>,
    #[arg(long)]
    pub shots_per_video: Option<usize>,
    #[arg(long)]
    pub n_concepts: Option<usize>,
    #[arg(long)]
    pub n_queries: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub signal_strength: Option<f64>,
    #[arg(long)]
    pub noise_level: Option<f64>,
    #[arg(long)]
    pub min_scene_len: Option<usize>,
    #[arg(long)]
    pub max_scene_len: Option<usize>,
    #[arg(long)]
    pub max_concepts_per_scene: Option<usize>,
    #[arg(long)]
    pub empty_scene_prob: Option<f64>,
    #[arg(long)]
    pub keep_prob: Option<f64>,
    /// Largest reference summary, as a fraction of the video's shots.
    #[arg(long)]
    pub summary_budget: Option<f64>,
}

impl GenDataArgs {
    pub fn apply(&self, c: &mut SynthConfig) {
        set(&mut c.seed, &self.seed);
        set(&mut c.n_videos, &self.n_videos);
        set(&mut c.shots_per_video, &self.shots_per_video);
        set(&mut c.n_concepts, &self.n_concepts);
        set(&mut c.n_queries, &self.n_queries);
        set(&mut c.feature_dim, &self.feature_dim);
        set(&mut c.embedding_dim, &self.embedding_dim);
        set(&mut c.signal_strength, &self.signal_strength);
        set(&mut c.noise_level, &self.noise_level);
        set(&mut c.min_scene_len, &self.min_scene_len);
        set(&mut c.max_scene_len, &self.max_scene_len);
        set(&mut c.max_concepts_per_scene, &self.max_concepts_per_scene);
        set(&mut c.empty_scene_prob, &self.empty_scene_prob);
        set(&mut c.keep_prob, &self.keep_prob);
        set(&mut c.summary_budget, &self.summary_budget);
    }
}

#[derive(Args)]
pub struct KtsArgs {
    #[arg(long)]
    pub max_segments: Option<usize>,
    #[arg(long)]
    pub max_segment_len: Option<usize>,
    /// Weight of the segment-count penalty.
    #[arg(long)]
    pub penalty: Option<f64>,
}

impl KtsArgs {
    pub fn apply(&self, c: &mut KtsConfig) {
        set(&mut c.max_segments, &self.max_segments);
        set(&mut c.max_segment_len, &self.max_segment_len);
        set(&mut c.penalty, &self.penalty);
    }
}

#[derive(Args)]
pub struct SegmentArgs {
    /// Shot feature file (CHF1 format).
    #[arg(long)]
    pub features: PathBuf,
    /// JSON segmentation config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub kts: KtsArgs,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum LabelArg {
    Fraction,
    Any,
}

#[derive(Args)]
#[group(multiple = false)]
pub struct PolicyArgs {
    /// Select every shot scoring at least this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Select the k highest scoring shots.
    #[arg(long)]
    pub top_k: Option<usize>,
}

impl PolicyArgs {
    pub fn policy(&self) -> Option<SelectionPolicy> {
        self.threshold.map(SelectionPolicy::Threshold).or(self.top_k.map(SelectionPolicy::TopK))
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// JSON run config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Run directory for the checkpoint, logs and metrics.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fold: Option<usize>,
    /// Seeds initialization and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub input_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub conv_channels: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub kernel_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub dilations: Option<Vec<usize>>,
    #[arg(long)]
    pub pool_window: Option<usize>,
    #[arg(long)]
    pub attention_dim: Option<usize>,
    #[arg(long)]
    pub fusion_dim: Option<usize>,
    #[arg(long)]
    pub mlp_hidden: Option<usize>,
    #[arg(long)]
    pub concept_embed_dim: Option<usize>,
    #[arg(long)]
    pub deconv_taps: Option<usize>,
    #[arg(long)]
    pub disable_local_attention: bool,
    #[arg(long)]
    pub disable_global_attention: bool,
    #[command(flatten)]
    pub policy: PolicyArgs,

    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Learning-rate multiplier applied after every epoch.
    #[arg(long)]
    pub decay_factor: Option<f64>,
    /// Epochs without validation improvement before stopping.
    #[arg(long, conflicts_with = "no_early_stopping")]
    pub patience: Option<usize>,
    #[arg(long)]
    pub no_early_stopping: bool,
    #[arg(long, value_enum)]
    pub label_mode: Option<LabelArg>,
    #[arg(long)]
    pub kts_max_segments: Option<usize>,
    #[arg(long)]
    pub kts_max_segment_len: Option<usize>,
    #[arg(long)]
    pub kts_penalty: Option<f64>,
}

impl TrainArgs {
    pub fn apply(&self, c: &mut RunConfig) {
        if self.dataset.is_some() {
            c.dataset = self.dataset.clone();
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        set(&mut c.fold, &self.fold);
        set(&mut c.seed, &self.seed);

        let m = &mut c.model;
        set(&mut m.input_dim, &self.input_dim);
        set(&mut m.conv_channels, &self.conv_channels);
        set(&mut m.kernel_sizes, &self.kernel_sizes);
        set(&mut m.dilations, &self.dilations);
        set(&mut m.pool_window, &self.pool_window);
        set(&mut m.attention_dim, &self.attention_dim);
        set(&mut m.fusion_dim, &self.fusion_dim);
        set(&mut m.mlp_hidden, &self.mlp_hidden);
        set(&mut m.concept_embed_dim, &self.concept_embed_dim);
        set(&mut m.deconv_taps, &self.deconv_taps);
        m.disable_local_attention |= self.disable_local_attention;
        m.disable_global_attention |= self.disable_global_attention;
        set(&mut m.selection, &self.policy.policy());

        let t = &mut c.train;
        set(&mut t.epochs, &self.epochs);
        set(&mut t.batch_size, &self.batch_size);
        set(&mut t.adam.learning_rate, &self.lr);
        set(&mut t.adam.beta1, &self.beta1);
        set(&mut t.adam.beta2, &self.beta2);
        set(&mut t.adam.epsilon, &self.epsilon);
        set(&mut t.adam.decay_factor, &self.decay_factor);
        if self.patience.is_some() {
            t.patience = self.patience;
        }
        if self.no_early_stopping {
            t.patience = None;
        }
        if let Some(mode) = self.label_mode {
            t.label_mode = match mode {
                LabelArg::Fraction => LabelMode::Fraction,
                LabelArg::Any => LabelMode::Any,
            };
        }
        set(&mut t.kts.max_segments, &self.kts_max_segments);
        set(&mut t.kts.max_segment_len, &self.kts_max_segment_len);
        set(&mut t.kts.penalty, &self.kts_penalty);
    }
}

#[derive(Args)]
pub struct SummarizeArgs {
    /// Checkpoint manifest written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset directory holding the videos and vocabulary.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Only this video; every video by default.
    #[arg(long)]
    pub video: Option<String>,
    /// Only this query, as `concept,concept`; every dataset query by default.
    #[arg(long)]
    pub query: Option<String>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Write the summaries here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Candidate summaries (JSON).
    #[arg(long)]
    pub summaries: PathBuf,
    /// Dataset directory supplying the vocabulary and annotations.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Reference summaries (JSON); the dataset's own by default.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Score every reference video, not only those with candidates.
    #[arg(long)]
    pub all_videos: bool,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative error.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Finite-difference step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Coordinates sampled per tensor.
    #[arg(long)]
    pub max_coords: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
