use serde::{Deserialize, Serialize};

use super::config::SelectionPolicy;

/// Per-shot scores and the selected shot indices, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResult {
    pub scores: Vec<f64>,
    pub selected: Vec<usize>,
}

impl SummaryResult {
    pub fn new(scores: Vec<f64>, policy: SelectionPolicy) -> Self {
        let selected = select_shots(&scores, policy);
        SummaryResult { scores, selected }
    }
}

/// Applies `policy` to `scores`. Top-k breaks ties towards the lower index.
pub fn select_shots(scores: &[f64], policy: SelectionPolicy) -> Vec<usize> {
    match policy {
        SelectionPolicy::Threshold(t) => (0..scores.len()).filter(|&i| scores[i] >= t).collect(),
        SelectionPolicy::TopK(k) => {
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            order.truncate(k);
            order.sort_unstable();
            order
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_examples() {
        assert_eq!(select_shots(&[0.9, 0.1, 0.8], SelectionPolicy::TopK(2)), vec![0, 2]);
        assert_eq!(select_shots(&[0.5, 0.7, 0.5, 0.5], SelectionPolicy::TopK(2)), vec![0, 1]);
        assert_eq!(select_shots(&[0.2, 0.3], SelectionPolicy::TopK(5)), vec![0, 1]);
    }

    #[test]
    fn threshold_examples() {
        assert!(select_shots(&[0.1, 0.2, 0.49], SelectionPolicy::Threshold(0.5)).is_empty());
        assert_eq!(select_shots(&[0.5, 0.2, 0.9], SelectionPolicy::Threshold(0.5)), vec![0, 2]);
    }
}
