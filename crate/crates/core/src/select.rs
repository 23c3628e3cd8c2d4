//! Deterministic top-k selection: larger score first, lower index on ties.

use std::cmp::Ordering;

fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Indices of the `k` largest scores, in rank order (best first).
pub(crate) fn top_k_ranked(scores: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(scores.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    idx
}

/// Index of the `rank`-th largest score (1-based rank).
pub(crate) fn nth_largest(scores: &[f64], rank: usize) -> usize {
    top_k_ranked(scores, rank)[rank - 1]
}

/// Indices of the `k` largest scores, sorted ascending by index.
pub(crate) fn top_k_sorted(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx = top_k_ranked(scores, k);
    idx.sort_unstable();
    idx
}
