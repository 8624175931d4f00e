//! Mini-batch training with per-epoch learning-rate decay and model
//! selection on validation F1.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{ChanModel, QueryEmbedding};
use super::select::SummaryResult;
use crate::dataset::{Dataset, Query, Summary};
use crate::error::{ChanError, Result};
use crate::evaluation::{evaluate_dataset, MetricsTable, ShotConceptSets};
use crate::optim::{AdamConfig, AdamState};
use crate::segmentation::{kts_segment, KtsConfig, SegmentBoundaries};
use crate::tensor::{Tape, Var};

/// Per-shot training target for a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Fraction of the two query concepts present: 0, 0.5 or 1.
    #[default]
    Fraction,
    /// 1 if either query concept is present.
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    pub label_mode: LabelMode,
    pub kts: KtsConfig,
    /// Seeds the per-epoch shuffle of (video, query) pairs.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 5,
            adam: AdamConfig::default(),
            patience: Some(5),
            label_mode: LabelMode::Fraction,
            kts: KtsConfig::default(),
            seed: 0,
        }
    }
}

/// One line of the JSON-lines training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
    /// Learning rate after the end-of-epoch decay.
    pub lr_end: f64,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation F1 (the last
    /// epoch when there is no validation set).
    pub model: ChanModel,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_f1: Option<f64>,
}

pub fn shot_labels(annotations: &ShotConceptSets, query: Query, mode: LabelMode) -> Vec<f64> {
    let [a, b] = query.concepts();
    annotations
        .iter()
        .map(|s| {
            let hits = usize::from(s.contains(&a)) + usize::from(a != b && s.contains(&b));
            let wanted = if a == b { 1 } else { 2 };
            match mode {
                LabelMode::Fraction => hits as f64 / wanted as f64,
                LabelMode::Any => f64::from(u8::from(hits > 0)),
            }
        })
        .collect()
}

/// Segments every video of the dataset.
pub fn segment_dataset(dataset: &Dataset, kts: &KtsConfig) -> Result<Vec<SegmentBoundaries>> {
    dataset.videos.iter().map(|v| kts_segment(&v.features, kts)).collect()
}

/// Scores and selects shots for every query of one video, sharing the
/// query-independent encoding.
pub fn summarize_video(
    model: &ChanModel,
    dataset: &Dataset,
    video: usize,
    boundaries: &SegmentBoundaries,
    queries: &[Query],
) -> Result<Vec<SummaryResult>> {
    let record = &dataset.videos[video];
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let enc = bound.encode_video(&mut tape, &record.features, boundaries)?;
    queries
        .iter()
        .map(|&q| {
            let qe = QueryEmbedding::new(&dataset.vocabulary, q)?;
            let out = bound.query_scores(&mut tape, &enc, &qe)?;
            Ok(SummaryResult::new(tape.value(out).to_vec(), model.config.selection))
        })
        .collect()
}

/// Summaries for every reference (video, query) pair among `videos`.
pub fn predict_summaries(
    model: &ChanModel,
    dataset: &Dataset,
    boundaries: &[SegmentBoundaries],
    videos: &[usize],
) -> Result<(Vec<Summary>, Vec<Summary>)> {
    let mut candidates = Vec::new();
    let mut references = Vec::new();
    for &v in videos {
        let id = &dataset.videos[v].id;
        let refs = dataset.references_for(id);
        let queries: Vec<Query> = refs.iter().map(|r| r.query).collect();
        let results = summarize_video(model, dataset, v, &boundaries[v], &queries)?;
        for (r, res) in refs.into_iter().zip(results) {
            candidates.push(Summary { video_id: id.clone(), query: r.query, shots: res.selected });
            references.push(r);
        }
    }
    Ok((candidates, references))
}

/// Runs the model on `videos` and scores it against the references.
pub fn evaluate_model(
    model: &ChanModel,
    dataset: &Dataset,
    boundaries: &[SegmentBoundaries],
    videos: &[usize],
) -> Result<MetricsTable> {
    let (candidates, references) = predict_summaries(model, dataset, boundaries, videos)?;
    evaluate_dataset(&candidates, &references, &dataset.annotations_map())
}

struct Pair {
    video: usize,
    query: Query,
}

/// Trains `model` on the `train` videos, selecting the epoch with the best
/// F1 on `val`. `on_step` sees every log record as it is produced.
pub fn fit(
    mut model: ChanModel,
    dataset: &Dataset,
    boundaries: &[SegmentBoundaries],
    train: &[usize],
    val: &[usize],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<TrainOutcome> {
    if train.is_empty() || dataset.queries.is_empty() {
        return Err(ChanError::EmptyDataset("no training videos or queries".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(ChanError::invalid("fit", "batch_size and epochs must be positive"));
    }
    if boundaries.len() != dataset.videos.len() {
        return Err(ChanError::invalid("fit", "one segmentation per video is required"));
    }
    let mut pairs: Vec<Pair> = train
        .iter()
        .flat_map(|&video| dataset.queries.iter().map(move |&query| Pair { video, query }))
        .collect();
    let embeddings: HashMap<Query, QueryEmbedding> = dataset
        .queries
        .iter()
        .map(|&q| Ok((q, QueryEmbedding::new(&dataset.vocabulary, q)?)))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(cfg.adam, model.params.tensors())?;
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, ChanModel)> = None;
    let mut since_best = 0;
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        pairs.shuffle(&mut rng);
        let lr = adam.learning_rate;
        let mut epoch_loss = 0.0;
        for batch in pairs.chunks(cfg.batch_size) {
            let loss = train_step(&mut model, &mut adam, dataset, boundaries, &embeddings, batch, cfg.label_mode)?;
            step += 1;
            epoch_loss += loss * batch.len() as f64;
            let record = StepRecord { epoch, step, loss, lr };
            on_step(&record);
            steps.push(record);
        }
        adam.decay();
        let val_f1 = if val.is_empty() {
            None
        } else {
            Some(evaluate_model(&model, dataset, boundaries, val)?.average.f1)
        };
        let record = EpochRecord {
            epoch,
            mean_loss: epoch_loss / pairs.len() as f64,
            lr,
            lr_end: adam.learning_rate,
            val_f1,
        };
        log::info!(
            "epoch {epoch}: loss {:.5}, lr {:.3e}, val F1 {}",
            record.mean_loss,
            lr,
            val_f1.map_or("n/a".to_string(), |f| format!("{f:.4}"))
        );
        epochs.push(record);

        let score = val_f1.unwrap_or(f64::NEG_INFINITY);
        let improved = match &best {
            None => true,
            Some((b, _, _)) => val_f1.is_none() || score > *b,
        };
        if improved {
            best = Some((score, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                log::info!("no validation improvement for {since_best} epochs; stopping");
                break;
            }
        }
    }
    let (score, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        steps,
        epochs,
        best_epoch,
        best_val_f1: score.is_finite().then_some(score),
    })
}

fn train_step(
    model: &mut ChanModel,
    adam: &mut AdamState,
    dataset: &Dataset,
    boundaries: &[SegmentBoundaries],
    embeddings: &HashMap<Query, QueryEmbedding>,
    batch: &[Pair],
    label_mode: LabelMode,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let mut order: Vec<usize> = Vec::new();
    for p in batch {
        if !order.contains(&p.video) {
            order.push(p.video);
        }
    }
    let mut losses: Vec<Var> = Vec::with_capacity(batch.len());
    for &video in &order {
        let record = &dataset.videos[video];
        let enc = bound.encode_video(&mut tape, &record.features, &boundaries[video])?;
        for p in batch.iter().filter(|p| p.video == video) {
            let scores = bound.query_scores(&mut tape, &enc, &embeddings[&p.query])?;
            let labels = shot_labels(&record.annotations, p.query, label_mode);
            losses.push(tape.bce_loss(scores, &labels)?);
        }
    }
    let mut total = losses[0];
    for &l in &losses[1..] {
        total = tape.add(total, l)?;
    }
    let total = tape.scale(total, 1.0 / losses.len() as f64);
    let loss = tape.scalar(total);
    let grads = tape.backward(total)?;
    let vars = bound.vars().to_vec();
    for (i, var) in vars.into_iter().enumerate() {
        let p = model.params.get_mut(i);
        p.zero_grad();
        if let Some(g) = grads.get(var) {
            p.accumulate_grad(g)?;
        } else {
            // unused (ablated) branches still take a zero-gradient step
            let zeros = vec![0.0; p.numel()];
            p.accumulate_grad(&zeros)?;
        }
    }
    adam.step(model.params.named_mut())?;
    Ok(loss)
}
