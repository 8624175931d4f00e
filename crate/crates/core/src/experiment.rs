//! A complete, reproducible train-and-evaluate run on one fold.

use std::path::PathBuf;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{split_protocol, Dataset, Split, Summary};
use crate::error::{ChanError, Result};
use crate::evaluation::{evaluate_dataset, MetricsTable, Prf};
use crate::model::{evaluate_model, fit, segment_dataset, ChanConfig, ChanModel, EpochRecord, StepRecord, TrainConfig, TrainOutcome};
use crate::segmentation::SegmentBoundaries;

/// Everything that determines a run. Saved next to every artifact so the
/// run can be repeated exactly.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ChanConfig,
    pub train: TrainConfig,
    /// Dataset directory.
    pub dataset: Option<PathBuf>,
    /// Directory receiving the checkpoint, log and metrics.
    pub out: Option<PathBuf>,
    pub fold: usize,
    /// Overrides `model.seed` and `train.seed`.
    pub seed: u64,
}

impl RunConfig {
    pub fn model_config(&self) -> ChanConfig {
        ChanConfig { seed: self.seed, ..self.model.clone() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fold: usize,
    pub split: Split,
    pub best_epoch: usize,
    pub best_val_f1: Option<f64>,
    pub epochs: Vec<EpochRecord>,
    pub test: MetricsTable,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub outcome: TrainOutcome,
    pub boundaries: Vec<SegmentBoundaries>,
}

impl RunOutput {
    pub fn model(&self) -> &ChanModel {
        &self.outcome.model
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.outcome.steps
    }
}

/// Segments every video, trains on the fold's training videos with model
/// selection on its validation video, and scores the test video.
pub fn run_experiment(cfg: &RunConfig, dataset: &Dataset, on_step: impl FnMut(&StepRecord)) -> Result<RunOutput> {
    check_dims(&cfg.model, dataset)?;
    let train_cfg = cfg.train_config();
    let boundaries = segment_dataset(dataset, &train_cfg.kts)?;
    let split = split_protocol(dataset.videos.len(), cfg.fold)?;
    let model = ChanModel::new(cfg.model_config())?;
    let outcome = fit(model, dataset, &boundaries, &split.train, &split.val, &train_cfg, on_step)?;
    let test = evaluate_model(&outcome.model, dataset, &boundaries, &split.test)?;
    let report = RunReport {
        fold: cfg.fold,
        split,
        best_epoch: outcome.best_epoch,
        best_val_f1: outcome.best_val_f1,
        epochs: outcome.epochs.clone(),
        test,
    };
    Ok(RunOutput { report, outcome, boundaries })
}

/// The model's input and embedding widths must match the dataset's.
pub fn check_dims(model: &ChanConfig, dataset: &Dataset) -> Result<()> {
    let feature_dim = dataset.videos.first().map_or(model.input_dim, |v| v.features.dim());
    let embedding_dim = dataset.vocabulary.embedding_dim();
    if feature_dim != model.input_dim {
        return Err(ChanError::invalid("run_config", format!("dataset features have {feature_dim} dims but input_dim is {}", model.input_dim)));
    }
    if embedding_dim != model.concept_embed_dim {
        return Err(ChanError::invalid(
            "run_config",
            format!("concept embeddings have {embedding_dim} dims but concept_embed_dim is {}", model.concept_embed_dim),
        ));
    }
    Ok(())
}

/// Expected metrics of summaries drawn uniformly at random: for every
/// reference, a random shot set of the same size. Averaged over `draws`.
pub fn random_baseline(dataset: &Dataset, videos: &[usize], draws: usize, seed: u64) -> Result<Prf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let references: Vec<Summary> = videos.iter().flat_map(|&v| dataset.references_for(&dataset.videos[v].id)).collect();
    let annotations = dataset.annotations_map();
    let mut total = Prf::default();
    for _ in 0..draws {
        let candidates: Vec<Summary> = references
            .iter()
            .map(|r| {
                let n = annotations[&r.video_id].len();
                let mut shots = sample(&mut rng, n, r.shots.len().min(n)).into_vec();
                shots.sort_unstable();
                Summary { shots, ..r.clone() }
            })
            .collect();
        let avg = evaluate_dataset(&candidates, &references, &annotations)?.average;
        total.precision += avg.precision;
        total.recall += avg.recall;
        total.f1 += avg.f1;
    }
    let n = draws.max(1) as f64;
    Ok(Prf { precision: total.precision / n, recall: total.recall / n, f1: total.f1 / n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, SynthConfig};

    #[test]
    fn seed_overrides_component_seeds() {
        let cfg = RunConfig { seed: 9, ..RunConfig::default() };
        assert_eq!(cfg.model_config().seed, 9);
        assert_eq!(cfg.train_config().seed, 9);
    }

    #[test]
    fn run_config_json_round_trip() {
        let cfg = RunConfig { fold: 2, dataset: Some("data".into()), ..RunConfig::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        let partial: RunConfig = serde_json::from_str(r#"{"fold": 1, "train": {"epochs": 3}}"#).unwrap();
        assert_eq!(partial.train.epochs, 3);
        assert_eq!(partial.train.batch_size, 5);
        assert!(serde_json::from_str::<RunConfig>(r#"{"folds": 1}"#).is_err());
    }

    #[test]
    fn random_baseline_is_deterministic_and_bounded() {
        let cfg = SynthConfig { n_videos: 3, shots_per_video: 50, n_concepts: 6, n_queries: 3, feature_dim: 4, embedding_dim: 4, ..SynthConfig::default() };
        let ds = synth_generate(&cfg).unwrap();
        let a = random_baseline(&ds, &[0, 1], 10, 1).unwrap();
        assert_eq!(a, random_baseline(&ds, &[0, 1], 10, 1).unwrap());
        assert!(a.f1 > 0.0 && a.f1 < 1.0);
    }
}
