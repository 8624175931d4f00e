//! Seeded synthetic datasets with planted, recoverable concept signals.
//!
//! Each video is a run of scenes. A scene carries zero to
//! `max_concepts_per_scene` concepts and every shot of the scene keeps each
//! of them independently with probability `keep_prob`. A shot's feature is
//! `Σ signal_strength·u_c + noise_level·ε` over its concepts `c`, where
//! `u_c` is a random unit direction and `ε` standard normal noise.
//!
//! The reference summary for query `(a, b)` is every shot containing `a` or
//! `b`, capped at `ceil(summary_budget · n)` shots, keeping shots with both
//! concepts first and then earlier shots.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::features::ShotFeatureSequence;
use super::manifest::{Dataset, Summary, VideoRecord};
use super::vocab::{ConceptId, ConceptVocabulary, Query};
use crate::error::{ChanError, Result};
use crate::evaluation::ShotConceptSets;

/// Default concept names; generated names are used past the end.
pub const CONCEPT_NAMES: [&str; 48] = [
    "beach", "bike", "boat", "book", "building", "car", "chair", "cup", "desk", "dog", "drink", "face", "flower",
    "food", "friends", "garden", "glass", "hall", "hand", "hat", "house", "kids", "lady", "lamp", "market", "men",
    "computer", "ocean", "office", "park", "phone", "room", "school", "shoes", "sign", "sky", "street", "sun",
    "sunglasses", "toy", "tree", "water", "window", "student", "pillow", "television", "tower", "road",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_videos: usize,
    pub shots_per_video: usize,
    pub n_concepts: usize,
    pub n_queries: usize,
    pub feature_dim: usize,
    pub embedding_dim: usize,
    pub signal_strength: f64,
    pub noise_level: f64,
    pub min_scene_len: usize,
    pub max_scene_len: usize,
    pub max_concepts_per_scene: usize,
    pub empty_scene_prob: f64,
    pub keep_prob: f64,
    pub summary_budget: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_videos: 4,
            shots_per_video: 300,
            n_concepts: 48,
            n_queries: 46,
            feature_dim: 2048,
            embedding_dim: 300,
            signal_strength: 4.0,
            noise_level: 1.0,
            min_scene_len: 5,
            max_scene_len: 15,
            max_concepts_per_scene: 3,
            empty_scene_prob: 0.4,
            keep_prob: 0.8,
            summary_budget: 0.2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(ChanError::invalid("synth_generate", msg));
        let positive = [
            ("n_videos", self.n_videos),
            ("shots_per_video", self.shots_per_video),
            ("n_queries", self.n_queries),
            ("feature_dim", self.feature_dim),
            ("embedding_dim", self.embedding_dim),
            ("min_scene_len", self.min_scene_len),
            ("max_concepts_per_scene", self.max_concepts_per_scene),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return fail(format!("{name} must be positive"));
        }
        if self.n_concepts < 2 {
            return fail("need at least 2 concepts".into());
        }
        let pairs = self.n_concepts * (self.n_concepts - 1) / 2;
        if self.n_queries > pairs {
            return fail(format!("{} queries requested but only {pairs} concept pairs exist", self.n_queries));
        }
        if self.min_scene_len > self.max_scene_len {
            return fail("min_scene_len exceeds max_scene_len".into());
        }
        if !(self.signal_strength > 0.0 && self.signal_strength.is_finite()) {
            return fail("signal_strength must be positive".into());
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return fail("noise_level must be non-negative".into());
        }
        for (name, p) in [("empty_scene_prob", self.empty_scene_prob), ("keep_prob", self.keep_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.summary_budget > 0.0 && self.summary_budget <= 1.0) {
            return fail(format!("summary_budget {} must lie in (0, 1]", self.summary_budget));
        }
        Ok(())
    }

    /// Maximum reference summary length for one video.
    pub fn summary_cap(&self) -> usize {
        (self.summary_budget * self.shots_per_video as f64).ceil() as usize
    }
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn concept_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match CONCEPT_NAMES.get(i) {
            Some(name) => (*name).to_string(),
            None => format!("concept{i:03}"),
        })
        .collect()
}

fn scene_annotations(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<BTreeSet<ConceptId>> {
    let mut shots = Vec::with_capacity(cfg.shots_per_video);
    while shots.len() < cfg.shots_per_video {
        let len = rng.random_range(cfg.min_scene_len..=cfg.max_scene_len);
        let concepts: Vec<ConceptId> = if rng.random_bool(cfg.empty_scene_prob) {
            Vec::new()
        } else {
            let k = rng.random_range(1..=cfg.max_concepts_per_scene.min(cfg.n_concepts));
            sample(rng, cfg.n_concepts, k).into_iter().map(ConceptId).collect()
        };
        for _ in 0..len.min(cfg.shots_per_video - shots.len()) {
            let kept = concepts.iter().copied().filter(|_| rng.random_bool(cfg.keep_prob)).collect();
            shots.push(kept);
        }
    }
    shots
}

fn reference_shots(ann: &ShotConceptSets, query: Query, cap: usize) -> Vec<usize> {
    let [a, b] = query.concepts();
    let mut relevant: Vec<(usize, usize)> = ann
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let hits = usize::from(s.contains(&a)) + usize::from(s.contains(&b));
            (hits > 0).then_some((hits, i))
        })
        .collect();
    relevant.sort_by_key(|&(hits, i)| (std::cmp::Reverse(hits), i));
    let mut shots: Vec<usize> = relevant.into_iter().take(cap).map(|(_, i)| i).collect();
    shots.sort_unstable();
    shots
}

/// Builds a complete dataset from `cfg`; the same config always yields the
/// same dataset.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let cap = cfg.summary_cap();
    if cap == 0 {
        return Err(ChanError::invalid("synth_generate", "summary budget rounds to zero shots"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let directions: Vec<Vec<f64>> = (0..cfg.n_concepts).map(|_| unit_vector(cfg.feature_dim, &mut rng)).collect();
    let embeddings: Vec<Vec<f64>> = (0..cfg.n_concepts).map(|_| unit_vector(cfg.embedding_dim, &mut rng)).collect();
    let vocabulary = ConceptVocabulary::new(concept_names(cfg.n_concepts), embeddings)?;

    let mut pairs: Vec<Query> = (0..cfg.n_concepts)
        .flat_map(|a| (a + 1..cfg.n_concepts).map(move |b| Query::new(ConceptId(a), ConceptId(b))))
        .collect();
    let picked = sample(&mut rng, pairs.len(), cfg.n_queries).into_vec();
    let queries: Vec<Query> = picked.into_iter().map(|i| pairs[i]).collect();
    pairs.clear();

    let mut videos = Vec::with_capacity(cfg.n_videos);
    let mut references = Vec::new();
    for v in 0..cfg.n_videos {
        let id = format!("video{:02}", v + 1);
        let sets = scene_annotations(cfg, &mut rng);
        let mut data = Vec::with_capacity(cfg.shots_per_video * cfg.feature_dim);
        for shot in &sets {
            let mut row = vec![0.0f64; cfg.feature_dim];
            for c in shot {
                for (r, u) in row.iter_mut().zip(&directions[c.0]) {
                    *r += cfg.signal_strength * u;
                }
            }
            for r in row.iter_mut() {
                let eps: f64 = rng.sample(StandardNormal);
                *r += cfg.noise_level * eps;
            }
            // Round through f32 so in-memory data equals what a reload sees.
            data.extend(row.into_iter().map(|x| f64::from(x as f32)));
        }
        let features = ShotFeatureSequence::new(cfg.shots_per_video, cfg.feature_dim, data)?;
        let annotations = ShotConceptSets::new(sets);
        for &q in &queries {
            references.push(Summary {
                video_id: id.clone(),
                query: q,
                shots: reference_shots(&annotations, q, cap),
            });
        }
        videos.push(VideoRecord { id, features, annotations });
    }
    let generator = serde_json::to_value(cfg).ok();
    let dataset = Dataset { vocabulary, queries, videos, references, generator };
    dataset.validate()?;
    log::info!(
        "generated {} videos × {} shots, {} concepts, {} queries",
        cfg.n_videos,
        cfg.shots_per_video,
        cfg.n_concepts,
        cfg.n_queries
    );
    Ok(dataset)
}
