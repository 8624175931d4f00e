use chan_core::dataset::ShotFeatureSequence;
use chan_core::segmentation::{brute_force_segment, kts_segment, penalized_cost, KtsConfig};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (ShotFeatureSequence, KtsConfig)> {
    (1usize..=12, 1usize..=3, 1usize..=4, 1usize..=12, 0.0f64..4.0).prop_flat_map(|(n, d, max_seg, max_len, penalty)| {
        // every instance must be feasible
        let max_len = max_len.max(n.div_ceil(max_seg));
        proptest::collection::vec(-3.0f64..3.0, n * d).prop_map(move |data| {
            let features = ShotFeatureSequence::new(n, d, data).unwrap();
            (features, KtsConfig { max_segments: max_seg, max_segment_len: max_len, penalty })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dp_matches_exhaustive_search((features, cfg) in instance()) {
        let dp = kts_segment(&features, &cfg).unwrap();
        let brute = brute_force_segment(&features, &cfg).unwrap();
        let (a, b) = (penalized_cost(&features, &dp, cfg.penalty), penalized_cost(&features, &brute, cfg.penalty));
        prop_assert_eq!(a, b, "dp {:?} vs brute {:?}", dp, brute);
        prop_assert!(dp.satisfies(&cfg));
        prop_assert_eq!(dp.lengths().iter().sum::<usize>(), features.n_shots());
    }

    #[test]
    fn permuting_feature_dimensions_changes_nothing((features, cfg) in instance(), rot in 0usize..3) {
        let d = features.dim();
        let rows: Vec<Vec<f64>> = (0..features.n_shots())
            .map(|i| (0..d).map(|k| features.row(i)[(k + rot) % d]).collect())
            .collect();
        let permuted = ShotFeatureSequence::from_rows(&rows).unwrap();
        let a = kts_segment(&features, &cfg).unwrap();
        let b = kts_segment(&permuted, &cfg).unwrap();
        let (ca, cb) = (penalized_cost(&features, &a, cfg.penalty), penalized_cost(&permuted, &b, cfg.penalty));
        prop_assert!((ca - cb).abs() <= 1e-9 * ca.abs().max(1.0));
    }
}

#[test]
fn two_plateaus_split_where_they_meet() {
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![if i < 18 { 0.0 } else { 5.0 }, 1.0]).collect();
    let f = ShotFeatureSequence::from_rows(&rows).unwrap();
    let b = kts_segment(&f, &KtsConfig::default()).unwrap();
    assert_eq!(b.change_points(), &[18]);
}
