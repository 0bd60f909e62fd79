use crate::error::{Result, TageError};

/// Mann-Whitney estimate of `P(pos > neg)` with ties counted as one half.
pub fn auc_from_scores(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(TageError::InvalidConfig(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    if all.iter().any(|(s, _)| s.is_nan()) {
        return Err(TageError::NonFinite("AUC score".into()));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Count, for every positive, the negatives strictly below it plus half of
    // the tied ones. Works on integer counts so the result is exact.
    let mut twice_wins: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut pos_here, mut neg_here) = (0u128, 0u128);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            j += 1;
        }
        twice_wins += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
        i = j;
    }
    let pairs = positives.len() as f64 * negatives.len() as f64;
    Ok(twice_wins as f64 / (2.0 * pairs))
}

/// AUC of `scores` against boolean ground-truth flags.
pub fn edge_auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(TageError::DimMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    let pos: Vec<f64> = scores.iter().zip(truth).filter(|(_, &t)| t).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(truth).filter(|(_, &t)| !t).map(|(&s, _)| s).collect();
    auc_from_scores(&pos, &neg)
}

/// AUC over the union of several instances' edges.
pub fn pooled_edge_auc<'a>(items: impl IntoIterator<Item = (&'a [f64], &'a [bool])>) -> Result<f64> {
    let (mut scores, mut truth) = (Vec::new(), Vec::new());
    for (s, t) in items {
        if s.len() != t.len() {
            return Err(TageError::DimMismatch("scores and labels differ in length".into()));
        }
        scores.extend_from_slice(s);
        truth.extend_from_slice(t);
    }
    edge_auc(&scores, &truth)
}
