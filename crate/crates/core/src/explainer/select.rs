use crate::error::{Result, TageError};

/// `ceil(percent / 100 * num_edges)`.
pub fn topk_count(num_edges: usize, percent: f64) -> usize {
    let raw = percent / 100.0 * num_edges as f64;
    // Guard against 10% of 40 landing a hair above 4.
    let k = (raw - 1e-9).ceil().max(0.0) as usize;
    k.min(num_edges)
}

/// Marks the highest-scoring `percent`% of edges; ties go to the lower index.
pub fn select_topk_edges(scores: &[f64], percent: f64) -> Result<Vec<bool>> {
    if scores.is_empty() {
        return Err(TageError::EmptyGraph);
    }
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(TageError::InvalidConfig(format!("top-k percent must be in (0, 100], got {percent}")));
    }
    let k = topk_count(scores.len(), percent);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut mask = vec![false; scores.len()];
    for &e in &order[..k] {
        mask[e] = true;
    }
    Ok(mask)
}
