use chan_core::dataset::{ConceptId, ShotFeatureSequence};
use chan_core::model::{ChanConfig, ChanModel, QueryEmbedding};
use chan_core::segmentation::SegmentBoundaries;
use chan_core::{gradient_check, GradcheckOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_instance(seed: u64) -> (ChanModel, ShotFeatureSequence, SegmentBoundaries, QueryEmbedding, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ChanConfig { seed, ..ChanConfig::tiny() };
    let model = ChanModel::new(cfg).unwrap();
    let data: Vec<f64> = (0..12 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let features = ShotFeatureSequence::new(12, 8, data).unwrap();
    let boundaries = SegmentBoundaries::new(vec![6], 12).unwrap();
    let emb = |rng: &mut ChaCha8Rng| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let query = QueryEmbedding::from_vectors([ConceptId(0), ConceptId(1)], emb(&mut rng), emb(&mut rng));
    let labels = (0..12).map(|_| [0.0, 0.5, 1.0][rng.random_range(0..3)]).collect();
    (model, features, boundaries, query, labels)
}

#[test]
fn end_to_end_tiny_model() {
    let (model, features, boundaries, query, labels) = tiny_instance(3);
    let report = gradient_check(
        |tape, vars| {
            let bound = model.bind_vars(vars)?;
            let scores = bound.forward(tape, &features, &boundaries, &query)?;
            tape.bce_loss(scores, &labels)
        },
        &model.params.to_named_vec(),
        &GradcheckOptions::default(),
    )
    .unwrap();
    for e in &report.entries {
        assert!(e.max_rel_error < 1e-4, "{}: {:?}", e.name, e);
    }
    assert!(report.passed, "max rel error {}", report.max_rel_error);
}
