use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConceptId, Summary};
use crate::error::{ChanError, Result};

use super::matching::{max_weight_matching, MatchedPair};

/// Concept annotations, one (possibly empty) set per shot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShotConceptSets(Vec<BTreeSet<ConceptId>>);

impl ShotConceptSets {
    pub fn new(sets: Vec<BTreeSet<ConceptId>>) -> Self {
        ShotConceptSets(sets)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, shot: usize) -> &BTreeSet<ConceptId> {
        &self.0[shot]
    }

    pub fn iter(&self) -> impl Iterator<Item = &BTreeSet<ConceptId>> {
        self.0.iter()
    }
}

/// `|a ∩ b| / |a ∪ b|`, or 0 when both are empty.
pub fn concept_iou(a: &BTreeSet<ConceptId>, b: &BTreeSet<ConceptId>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(matched: usize, n_candidate: usize, n_reference: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self::from_pr(ratio(matched, n_candidate), ratio(matched, n_reference))
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }

    fn mean(items: &[Prf]) -> Prf {
        if items.is_empty() {
            return Prf::default();
        }
        let n = items.len() as f64;
        Prf {
            precision: items.iter().map(|p| p.precision).sum::<f64>() / n,
            recall: items.iter().map(|p| p.recall).sum::<f64>() / n,
            f1: items.iter().map(|p| p.f1).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// `(candidate_shot, reference_shot, weight)`, positive weights only.
    pub matched_pairs: Vec<MatchedPair>,
    #[serde(flatten)]
    pub scores: Prf,
}

fn dedup(shots: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> = shots.iter().copied().collect();
    set.into_iter().collect()
}

/// Scores `candidate` against `reference` by maximum-weight matching on
/// concept IoU; precision and recall count positive-weight matched pairs.
pub fn evaluate_summary(candidate: &[usize], reference: &[usize], annotations: &ShotConceptSets) -> Result<MatchReport> {
    let candidate = dedup(candidate);
    let reference = dedup(reference);
    if let Some(&bad) = candidate.iter().chain(&reference).find(|&&s| s >= annotations.len()) {
        return Err(ChanError::Validation(format!(
            "shot {bad} out of range for {} annotated shots",
            annotations.len()
        )));
    }
    let weights: Vec<Vec<f64>> = candidate
        .iter()
        .map(|&c| reference.iter().map(|&r| concept_iou(annotations.get(c), annotations.get(r))).collect())
        .collect();
    let matched_pairs: Vec<MatchedPair> = max_weight_matching(&weights)?
        .into_iter()
        .map(|(i, j, w)| (candidate[i], reference[j], w))
        .collect();
    let scores = Prf::from_counts(matched_pairs.len(), candidate.len(), reference.len());
    Ok(MatchReport { matched_pairs, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub video_id: String,
    pub n_queries: usize,
    #[serde(flatten)]
    pub scores: Prf,
}

/// Per-video averages over queries plus the average over videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub videos: Vec<VideoMetrics>,
    pub average: Prf,
}

impl MetricsTable {
    /// Aligned text table in percent, one row per video and a final `Avg.` row.
    pub fn to_text(&self) -> String {
        let width = self.videos.iter().map(|v| v.video_id.len()).chain([5]).max().unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}  {:>7}", "", "Pre", "Rec", "F1");
        let mut row = |name: &str, p: &Prf| {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}",
                name,
                100.0 * p.precision,
                100.0 * p.recall,
                100.0 * p.f1
            );
        };
        for v in &self.videos {
            row(&v.video_id, &v.scores);
        }
        row("Avg.", &self.average);
        out
    }
}

/// Evaluates every reference summary against the candidate for the same
/// video and query (a missing candidate counts as empty). Scores are
/// averaged over queries within each video, then over videos.
pub fn evaluate_dataset(
    candidates: &[Summary],
    references: &[Summary],
    annotations: &HashMap<String, ShotConceptSets>,
) -> Result<MetricsTable> {
    let lookup: HashMap<(&str, _), &Summary> = candidates
        .iter()
        .map(|s| ((s.video_id.as_str(), s.query.canonical()), s))
        .collect();
    let mut order: Vec<&str> = Vec::new();
    let mut per_video: HashMap<&str, Vec<Prf>> = HashMap::new();
    for reference in references {
        let ann = annotations
            .get(&reference.video_id)
            .ok_or_else(|| ChanError::Validation(format!("no annotations for video `{}`", reference.video_id)))?;
        let candidate = lookup
            .get(&(reference.video_id.as_str(), reference.query.canonical()))
            .map_or(&[][..], |s| s.shots.as_slice());
        let report = evaluate_summary(candidate, &reference.shots, ann)?;
        let vid = reference.video_id.as_str();
        if !per_video.contains_key(vid) {
            order.push(vid);
        }
        per_video.entry(vid).or_default().push(report.scores);
    }
    let videos: Vec<VideoMetrics> = order
        .into_iter()
        .map(|vid| {
            let scores = &per_video[vid];
            VideoMetrics {
                video_id: vid.to_string(),
                n_queries: scores.len(),
                scores: Prf::mean(scores),
            }
        })
        .collect();
    let average = Prf::mean(&videos.iter().map(|v| v.scores).collect::<Vec<_>>());
    Ok(MetricsTable { videos, average })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[usize]) -> BTreeSet<ConceptId> {
        ids.iter().map(|&i| ConceptId(i)).collect()
    }

    #[test]
    fn iou_examples() {
        // car=0, tree=1, sky=2
        assert_eq!(concept_iou(&set(&[0, 1]), &set(&[0, 1])), 1.0);
        assert_eq!(concept_iou(&set(&[0]), &set(&[1])), 0.0);
        assert_eq!(concept_iou(&set(&[0, 1]), &set(&[0, 2])), 1.0 / 3.0);
        assert_eq!(concept_iou(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn self_match_is_perfect() {
        let ann = ShotConceptSets::new(vec![set(&[0]), set(&[1, 2]), set(&[2]), set(&[0, 1])]);
        let r = evaluate_summary(&[0, 1, 3], &[0, 1, 3], &ann).unwrap();
        assert_eq!(r.scores, Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn empty_candidate_scores_zero() {
        let ann = ShotConceptSets::new(vec![set(&[0]), set(&[1])]);
        let r = evaluate_summary(&[], &[0, 1], &ann).unwrap();
        assert_eq!(r.scores, Prf::default());
        assert!(r.matched_pairs.is_empty());
    }

    #[test]
    fn unrelated_shots_do_not_count() {
        let ann = ShotConceptSets::new(vec![set(&[0]), set(&[1]), set(&[]), set(&[])]);
        let r = evaluate_summary(&[1, 2], &[0, 3], &ann).unwrap();
        assert_eq!(r.scores.f1, 0.0);
    }

    #[test]
    fn out_of_range_shot_rejected() {
        let ann = ShotConceptSets::new(vec![set(&[0])]);
        assert!(evaluate_summary(&[1], &[0], &ann).is_err());
    }

    #[test]
    fn f1_definition() {
        let p = Prf::from_counts(2, 4, 2);
        assert_eq!((p.precision, p.recall), (0.5, 1.0));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(Prf::from_counts(0, 0, 0).f1, 0.0);
    }
}
