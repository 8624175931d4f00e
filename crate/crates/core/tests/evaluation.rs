use std::collections::{BTreeSet, HashMap, HashSet};

use chan_core::dataset::{ConceptId, Query, Summary};
use chan_core::evaluation::{
    concept_iou, evaluate_dataset, evaluate_summary, max_weight_matching, total_weight, MatchedPair, ShotConceptSets,
};
use itertools::Itertools;
use proptest::prelude::*;

/// Best total over every injective assignment of the smaller side, summed
/// in row order.
fn brute_force_total(w: &[Vec<f64>]) -> f64 {
    let (p, q) = (w.len(), w[0].len());
    if p <= q {
        (0..q)
            .permutations(p)
            .map(|cols| cols.iter().enumerate().map(|(r, &c)| w[r][c]).sum::<f64>())
            .fold(0.0, f64::max)
    } else {
        (0..p)
            .permutations(q)
            .map(|rows| {
                let mut pairs: Vec<(usize, usize)> = rows.iter().enumerate().map(|(c, &r)| (r, c)).collect();
                pairs.sort_unstable();
                pairs.iter().map(|&(r, c)| w[r][c]).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

fn assert_valid_matching(pairs: &[MatchedPair], w: &[Vec<f64>]) {
    let rows: HashSet<usize> = pairs.iter().map(|p| p.0).collect();
    let cols: HashSet<usize> = pairs.iter().map(|p| p.1).collect();
    assert_eq!(rows.len(), pairs.len());
    assert_eq!(cols.len(), pairs.len());
    for &(r, c, weight) in pairs {
        assert_eq!(weight, w[r][c]);
        assert!(weight > 0.0);
    }
}

/// Weights on a 1/64 grid so every partial sum is exact.
fn dyadic_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=7, 1usize..=7).prop_flat_map(|(p, q)| {
        proptest::collection::vec(proptest::collection::vec((0u32..=128).prop_map(|k| f64::from(k) / 64.0), q), p)
    })
}

fn sets(items: &[&[usize]]) -> ShotConceptSets {
    ShotConceptSets::new(items.iter().map(|s| s.iter().map(|&c| ConceptId(c)).collect()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hungarian_equals_exhaustive_optimum(w in dyadic_matrix()) {
        let pairs = max_weight_matching(&w).unwrap();
        assert_valid_matching(&pairs, &w);
        prop_assert_eq!(total_weight(&pairs), brute_force_total(&w));
    }

    #[test]
    fn total_weight_ignores_row_and_column_order(w in dyadic_matrix(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = w.clone();
        rows.shuffle(&mut rng);
        let mut perm: Vec<usize> = (0..w[0].len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&c| r[c]).collect()).collect();
        let a = total_weight(&max_weight_matching(&w).unwrap());
        let b = total_weight(&max_weight_matching(&shuffled).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scores_are_bounded_and_order_free(
        ann in proptest::collection::vec(proptest::collection::btree_set(0usize..5, 0..3), 12),
        cand in proptest::collection::vec(0usize..12, 0..8),
        refs in proptest::collection::vec(0usize..12, 0..8),
    ) {
        let ann = ShotConceptSets::new(ann.into_iter().map(|s| s.into_iter().map(ConceptId).collect()).collect());
        let a = evaluate_summary(&cand, &refs, &ann).unwrap();
        let mut rev = cand.clone();
        rev.reverse();
        let b = evaluate_summary(&rev, &refs, &ann).unwrap();
        prop_assert_eq!(a.scores, b.scores);
        let s = a.scores;
        for x in [s.precision, s.recall, s.f1] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-15);
    }
}

#[test]
fn two_by_two_matching_example() {
    let pairs = max_weight_matching(&[vec![0.9, 0.8], vec![0.9, 0.1]]).unwrap();
    assert_eq!(pairs.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
    assert!((total_weight(&pairs) - 1.7).abs() < 1e-12);
}

#[test]
fn iou_manual_case() {
    let (car, tree, sky) = (ConceptId(0), ConceptId(1), ConceptId(2));
    let a: BTreeSet<_> = [car, tree].into();
    let b: BTreeSet<_> = [car, sky].into();
    assert!((concept_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn three_candidates_against_two_references() {
    // shots: 0 {0,1}  1 {1}  2 {2}  3 {0}  4 {1,2}
    let ann = sets(&[&[0, 1], &[1], &[2], &[0], &[1, 2]]);
    let report = evaluate_summary(&[0, 1, 2], &[3, 4], &ann).unwrap();
    // IoU rows = candidates 0,1,2; cols = references 3,4
    let w = vec![vec![0.5, 1.0 / 3.0], vec![0.0, 0.5], vec![0.0, 0.5]];
    let best = brute_force_total(&w);
    assert!((total_weight(&report.matched_pairs) - best).abs() < 1e-12);
    assert_eq!(report.matched_pairs.len(), 2);
    assert!((report.scores.precision - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(report.scores.recall, 1.0);
    assert!((report.scores.f1 - 0.8).abs() < 1e-12);
}

#[test]
fn dataset_average_matches_recomputation() {
    let ann: HashMap<String, ShotConceptSets> = [
        ("a".to_string(), sets(&[&[0], &[1], &[0, 1], &[2], &[]])),
        ("b".to_string(), sets(&[&[2], &[2, 3], &[3], &[0]])),
    ]
    .into();
    let q1 = Query::new(ConceptId(0), ConceptId(1));
    let q2 = Query::new(ConceptId(2), ConceptId(3));
    let s = |v: &str, q, shots: &[usize]| Summary { video_id: v.into(), query: q, shots: shots.to_vec() };
    let references = vec![s("a", q1, &[0, 2]), s("a", q2, &[3]), s("b", q2, &[0, 1, 2])];
    // q2 on video a is deliberately missing and must count as empty
    let candidates = vec![s("a", Query::new(ConceptId(1), ConceptId(0)), &[1, 4]), s("b", q2, &[1, 3])];
    let table = evaluate_dataset(&candidates, &references, &ann).unwrap();

    let f1 = |c: &[usize], r: &[usize], v: &str| evaluate_summary(c, r, &ann[v]).unwrap().scores;
    let a1 = f1(&[1, 4], &[0, 2], "a");
    let a2 = f1(&[], &[3], "a");
    let b1 = f1(&[1, 3], &[0, 1, 2], "b");
    let video_a = (a1.f1 + a2.f1) / 2.0;
    let video_b = b1.f1;
    assert_eq!(table.videos.len(), 2);
    assert_eq!(table.videos[0].video_id, "a");
    assert_eq!(table.videos[0].n_queries, 2);
    assert!((table.videos[0].scores.f1 - video_a).abs() < 1e-15);
    assert!((table.average.f1 - (video_a + video_b) / 2.0).abs() < 1e-15);
    assert!((table.average.precision - ((a1.precision + a2.precision) / 2.0 + b1.precision) / 2.0).abs() < 1e-15);

    let text = table.to_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].contains("Pre") && lines[0].contains("Rec") && lines[0].contains("F1"));
    assert!(lines[3].starts_with("Avg."));
}

#[test]
fn single_video_single_query_reduces_to_evaluate_summary() {
    let ann: HashMap<String, ShotConceptSets> = [("v".to_string(), sets(&[&[0], &[1], &[0, 1]]))].into();
    let q = Query::new(ConceptId(0), ConceptId(1));
    let c = Summary { video_id: "v".into(), query: q, shots: vec![0, 1] };
    let r = Summary { video_id: "v".into(), query: q, shots: vec![2] };
    let table = evaluate_dataset(&[c], &[r], &ann).unwrap();
    assert_eq!(table.average, evaluate_summary(&[0, 1], &[2], &ann["v"]).unwrap().scores);
}
