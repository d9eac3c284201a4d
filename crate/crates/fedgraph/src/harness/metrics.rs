//! Binary classification metrics: confusion counts at a fixed threshold plus
//! a rank-based AUC estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// None when the labels are single-class; the rank statistic needs both.
    pub auc: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub threshold: f64,
}

/// Confusion counts at `threshold` (score >= threshold predicts positive),
/// rates with the 0-when-undefined convention, and Mann-Whitney AUC with tied
/// scores counted half.
pub fn compute_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    if scores.is_empty() {
        return Err(Error::EmptyLabels);
    }
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "labels for scores".into(),
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    let n = scores.len() as f64;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(MetricsReport {
        accuracy: (tp + tn) as f64 / n,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fneg),
        f1: ratio(2 * tp, 2 * tp + fp + fneg),
        auc: mann_whitney_auc(scores, labels),
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fneg,
        threshold,
    })
}

/// AUC as the rank-sum statistic: P(score_pos > score_neg) + P(equal)/2,
/// computed in O(n log n) with tie-averaged ranks. None on single-class input.
pub fn mann_whitney_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut at = 0;
    while at < order.len() {
        let mut end = at + 1;
        while end < order.len() && scores[order[end]] == scores[order[at]] {
            end += 1;
        }
        // 1-based ranks at..end share the group average.
        let avg_rank = (at + 1 + end) as f64 / 2.0;
        for &i in &order[at..end] {
            if labels[i] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        at = end;
    }
    let p = pos as f64;
    Some((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * neg as f64))
}
