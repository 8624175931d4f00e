use std::hint::black_box;

use chan_core::dataset::{synth_generate, Query, SynthConfig};
use chan_core::evaluation::{evaluate_summary, max_weight_matching};
use chan_core::model::{summarize_video, ChanConfig, ChanModel, QueryEmbedding};
use chan_core::segmentation::{kts_segment, KtsConfig};
use chan_core::Tape;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_config() -> ChanConfig {
    ChanConfig {
        input_dim: 64,
        conv_channels: vec![32, 64],
        attention_dim: 32,
        fusion_dim: 64,
        mlp_hidden: 32,
        concept_embed_dim: 32,
        ..ChanConfig::default()
    }
}

fn dataset() -> chan_core::Dataset {
    let cfg = SynthConfig {
        n_videos: 1,
        shots_per_video: 300,
        n_concepts: 20,
        n_queries: 20,
        feature_dim: 64,
        embedding_dim: 32,
        ..SynthConfig::default()
    };
    synth_generate(&cfg).unwrap()
}

fn model(c: &mut Criterion) {
    let ds = dataset();
    let video = &ds.videos[0];
    let boundaries = kts_segment(&video.features, &KtsConfig::default()).unwrap();
    let model = ChanModel::new(bench_config()).unwrap();
    let query = ds.queries[0];
    let qe = QueryEmbedding::new(&ds.vocabulary, query).unwrap();

    c.bench_function("forward_300_shots", |b| {
        b.iter(|| model.scores(black_box(&video.features), &boundaries, &qe).unwrap())
    });
    c.bench_function("forward_backward_300_shots", |b| {
        let labels = vec![0.5; video.n_shots()];
        b.iter(|| {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape);
            let scores = bound.forward(&mut tape, &video.features, &boundaries, &qe).unwrap();
            let loss = tape.bce_loss(scores, &labels).unwrap();
            tape.backward(loss).unwrap()
        })
    });
    let queries: Vec<Query> = ds.queries.clone();
    c.bench_function("summarize_300_shots_20_queries", |b| {
        b.iter(|| summarize_video(&model, &ds, 0, &boundaries, black_box(&queries)).unwrap())
    });
}

fn segmentation(c: &mut Criterion) {
    let ds = dataset();
    let features = &ds.videos[0].features;
    let mut group = c.benchmark_group("kts");
    for max_segments in [10, 20] {
        let cfg = KtsConfig { max_segments, ..KtsConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(max_segments), &cfg, |b, cfg| {
            b.iter(|| kts_segment(black_box(features), cfg).unwrap())
        });
    }
    group.finish();
}

fn matching(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("hungarian");
    for n in [10, 30, 60] {
        let w: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| b.iter(|| max_weight_matching(black_box(w)).unwrap()));
    }
    group.finish();

    let ds = dataset();
    let ann = &ds.videos[0].annotations;
    let candidate: Vec<usize> = (0..300).step_by(5).collect();
    let reference: Vec<usize> = (2..300).step_by(6).collect();
    c.bench_function("evaluate_summary_60x50", |b| {
        b.iter(|| evaluate_summary(black_box(&candidate), &reference, ann).unwrap())
    });
}

criterion_group!(benches, model, segmentation, matching);
criterion_main!(benches);
