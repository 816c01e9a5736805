use crate::intersect::IoUMatrix;

/// What happened to one prediction at one IoU threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Matched the ground truth with this index.
    TruePositive(usize),
    FalsePositive,
    /// Overlaps an ignored ground truth; neither credited nor penalized.
    Discarded,
}

/// Greedy matching of one image and one category at threshold `tau`.
///
/// Rows of `ious` are predictions and must already be in descending score
/// order. Each prediction takes the unmatched, non-ignored ground truth with
/// the highest IoU `>= tau` (ties go to the lower ground-truth index). A
/// prediction that finds none but overlaps an ignored ground truth at
/// `>= tau` is discarded; otherwise it is a false positive.
pub fn greedy_match(ious: &IoUMatrix, ignored: &[bool], tau: f64) -> Vec<Outcome> {
    debug_assert_eq!(ious.cols(), ignored.len());
    let mut taken = vec![false; ignored.len()];
    (0..ious.rows())
        .map(|i| {
            let row = ious.row(i);
            let mut best: Option<(usize, f64)> = None;
            for (j, &iou) in row.iter().enumerate() {
                if ignored[j] || taken[j] || iou < tau {
                    continue;
                }
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((j, iou));
                }
            }
            if let Some((j, _)) = best {
                taken[j] = true;
                Outcome::TruePositive(j)
            } else if row.iter().zip(ignored).any(|(&iou, &ig)| ig && iou >= tau) {
                Outcome::Discarded
            } else {
                Outcome::FalsePositive
            }
        })
        .collect()
}

/// 101-point interpolated average precision.
///
/// `ranked` holds `(score, is_true_positive)` for every non-discarded
/// prediction. Entries are stably sorted by descending score, so the input
/// order breaks ties. Returns `None` when there is no ground truth to
/// recall.
pub fn average_precision(ranked: &[(f64, bool)], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| ranked[b].0.total_cmp(&ranked[a].0));

    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &k in &order {
        if ranked[k].1 {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let sum: f64 = (0..=100)
        .map(|r| {
            let threshold = r as f64 / 100.0;
            let idx = recall.partition_point(|&rc| rc < threshold);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    Some(sum / 101.0)
}
