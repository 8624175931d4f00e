//! Kernel temporal segmentation with a linear kernel.
//!
//! A segmentation into `m` segments is scored by its within-segment
//! scatter `Σ_seg Σ_{i∈seg} ‖x_i − μ_seg‖²`. For each feasible `m` the
//! minimum scatter is found by dynamic programming; `m` itself is chosen by
//! minimising `scatter(m) + λ·m·(ln(n/m) + 1)`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataset::ShotFeatureSequence;
use crate::error::{ChanError, Result};

/// Largest sequence [`brute_force_segment`] will enumerate.
pub const BRUTE_FORCE_MAX_SHOTS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KtsConfig {
    pub max_segments: usize,
    pub max_segment_len: usize,
    /// Weight λ of the model-selection penalty.
    pub penalty: f64,
}

impl Default for KtsConfig {
    fn default() -> Self {
        KtsConfig {
            max_segments: 20,
            max_segment_len: 200,
            penalty: 1.0,
        }
    }
}

/// Change points partitioning `0..n_shots` into contiguous segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentBoundaries {
    change_points: Vec<usize>,
    n_shots: usize,
}

impl SegmentBoundaries {
    pub fn new(change_points: Vec<usize>, n_shots: usize) -> Result<Self> {
        let mut prev = 0;
        for &cp in &change_points {
            if cp <= prev || cp >= n_shots {
                return Err(ChanError::Segmentation(format!(
                    "change points {change_points:?} must be strictly increasing inside (0, {n_shots})"
                )));
            }
            prev = cp;
        }
        Ok(SegmentBoundaries { change_points, n_shots })
    }

    pub fn single(n_shots: usize) -> Self {
        SegmentBoundaries { change_points: Vec::new(), n_shots }
    }

    /// Segments of (at most) `len` shots each.
    pub fn uniform(n_shots: usize, len: usize) -> Self {
        let change_points = (1..n_shots.div_ceil(len.max(1))).map(|k| k * len).collect();
        SegmentBoundaries { change_points, n_shots }
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn n_shots(&self) -> usize {
        self.n_shots
    }

    pub fn n_segments(&self) -> usize {
        self.change_points.len() + 1
    }

    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut starts = vec![0];
        starts.extend_from_slice(&self.change_points);
        let mut ends = self.change_points.clone();
        ends.push(self.n_shots);
        starts.into_iter().zip(ends).map(|(s, e)| s..e).collect()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.segments().iter().map(ExactSizeIterator::len).collect()
    }

    pub fn satisfies(&self, cfg: &KtsConfig) -> bool {
        self.n_segments() <= cfg.max_segments && self.lengths().iter().all(|&l| l <= cfg.max_segment_len)
    }
}

fn validate(n: usize, cfg: &KtsConfig) -> Result<()> {
    if n == 0 {
        return Err(ChanError::Segmentation("empty feature sequence".into()));
    }
    if cfg.max_segments == 0 || cfg.max_segment_len == 0 {
        return Err(ChanError::Segmentation("max_segments and max_segment_len must be positive".into()));
    }
    if n > cfg.max_segments * cfg.max_segment_len {
        return Err(ChanError::Segmentation(format!(
            "{n} shots cannot be covered by {} segments of at most {} shots",
            cfg.max_segments, cfg.max_segment_len
        )));
    }
    Ok(())
}

/// Model-selection penalty `λ·m·(ln(n/m) + 1)`.
pub fn segment_count_penalty(n: usize, m: usize, lambda: f64) -> f64 {
    lambda * m as f64 * ((n as f64 / m as f64).ln() + 1.0)
}

/// Within-segment scatter computed directly from segment means.
pub fn scatter(features: &ShotFeatureSequence, boundaries: &SegmentBoundaries) -> f64 {
    let dim = features.dim();
    let mut total = 0.0;
    for seg in boundaries.segments() {
        let len = seg.len() as f64;
        let mut mean = vec![0.0; dim];
        for i in seg.clone() {
            for (m, x) in mean.iter_mut().zip(features.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= len);
        for i in seg {
            total += features.row(i).iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>();
        }
    }
    total
}

/// Scatter plus the segment-count penalty; the quantity both the DP and the
/// exhaustive search minimise.
pub fn penalized_cost(features: &ShotFeatureSequence, boundaries: &SegmentBoundaries, lambda: f64) -> f64 {
    scatter(features, boundaries) + segment_count_penalty(features.n_shots(), boundaries.n_segments(), lambda)
}

/// Scatter of every segment `start..start+len` with `len ≤ max_len`, from
/// prefix sums: `Σ‖x‖² − ‖Σx‖²/len`.
struct ScatterTable {
    max_len: usize,
    costs: Vec<f64>,
}

impl ScatterTable {
    fn new(features: &ShotFeatureSequence, max_len: usize) -> Self {
        let (n, dim) = (features.n_shots(), features.dim());
        let mut sums = vec![0.0; (n + 1) * dim];
        let mut sq = vec![0.0; n + 1];
        for i in 0..n {
            let row = features.row(i);
            sq[i + 1] = sq[i] + row.iter().map(|x| x * x).sum::<f64>();
            for k in 0..dim {
                sums[(i + 1) * dim + k] = sums[i * dim + k] + row[k];
            }
        }
        let max_len = max_len.min(n);
        let mut costs = vec![f64::INFINITY; n * max_len];
        for start in 0..n {
            for len in 1..=max_len.min(n - start) {
                let end = start + len;
                let norm: f64 = (0..dim)
                    .map(|k| {
                        let s = sums[end * dim + k] - sums[start * dim + k];
                        s * s
                    })
                    .sum();
                let c = (sq[end] - sq[start]) - norm / len as f64;
                costs[start * max_len + len - 1] = c.max(0.0);
            }
        }
        ScatterTable { max_len, costs }
    }

    fn get(&self, start: usize, end: usize) -> f64 {
        let len = end - start;
        if len == 0 || len > self.max_len {
            return f64::INFINITY;
        }
        self.costs[start * self.max_len + len - 1]
    }
}

/// Optimal segmentation under the cardinality constraints in `cfg`.
///
/// Ties between segment counts go to the smaller count; ties inside the DP
/// go to the earliest change point.
pub fn kts_segment(features: &ShotFeatureSequence, cfg: &KtsConfig) -> Result<SegmentBoundaries> {
    let n = features.n_shots();
    validate(n, cfg)?;
    let table = ScatterTable::new(features, cfg.max_segment_len);
    let max_m = cfg.max_segments.min(n);
    // best[m][j]: least scatter covering shots 0..j with m segments
    let mut best = vec![vec![f64::INFINITY; n + 1]; max_m + 1];
    let mut back = vec![vec![0usize; n + 1]; max_m + 1];
    best[0][0] = 0.0;
    for m in 1..=max_m {
        for j in m..=n {
            let lo = (m - 1).max(j.saturating_sub(table.max_len));
            let mut arg = usize::MAX;
            let mut val = f64::INFINITY;
            for i in lo..j {
                let c = best[m - 1][i] + table.get(i, j);
                if c < val {
                    val = c;
                    arg = i;
                }
            }
            best[m][j] = val;
            back[m][j] = arg;
        }
    }
    let mut chosen = None;
    for m in 1..=max_m {
        if !best[m][n].is_finite() {
            continue;
        }
        let total = best[m][n] + segment_count_penalty(n, m, cfg.penalty);
        if chosen.is_none_or(|(_, t)| total < t) {
            chosen = Some((m, total));
        }
    }
    let (m, _) = chosen.ok_or_else(|| ChanError::Segmentation("no feasible segmentation".into()))?;
    let mut change_points = Vec::with_capacity(m - 1);
    let mut end = n;
    for k in (1..=m).rev() {
        let start = back[k][end];
        if k > 1 {
            change_points.push(start);
        }
        end = start;
    }
    change_points.reverse();
    SegmentBoundaries::new(change_points, n)
}

/// Exhaustive search over all feasible segmentations; a test oracle.
///
/// Ties go to fewer segments, then to the lexicographically smallest
/// change-point list.
pub fn brute_force_segment(features: &ShotFeatureSequence, cfg: &KtsConfig) -> Result<SegmentBoundaries> {
    let n = features.n_shots();
    validate(n, cfg)?;
    if n > BRUTE_FORCE_MAX_SHOTS {
        return Err(ChanError::Segmentation(format!(
            "brute force limited to {BRUTE_FORCE_MAX_SHOTS} shots, got {n}"
        )));
    }
    let mut best: Option<(f64, SegmentBoundaries)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let cps: Vec<usize> = (1..n).filter(|&i| mask & (1 << (i - 1)) != 0).collect();
        let cand = SegmentBoundaries::new(cps, n)?;
        if !cand.satisfies(cfg) {
            continue;
        }
        let cost = penalized_cost(features, &cand, cfg.penalty);
        let better = match &best {
            None => true,
            Some((bc, bb)) => {
                cost < *bc
                    || (cost == *bc
                        && (cand.n_segments(), cand.change_points()) < (bb.n_segments(), bb.change_points()))
            }
        };
        if better {
            best = Some((cost, cand));
        }
    }
    best.map(|(_, b)| b)
        .ok_or_else(|| ChanError::Segmentation("no feasible segmentation".into()))
}
