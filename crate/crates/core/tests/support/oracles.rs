//! Brute-force versions of the ranking metrics.

pub fn mrr_loop(ranks: &[usize]) -> f64 {
    let mut total = 0.0;
    for r in ranks {
        total += 1.0 / *r as f64;
    }
    total / ranks.len() as f64
}

pub fn recall_loop(ranks: &[usize], k: usize) -> f64 {
    let mut hits = 0;
    for r in ranks {
        if *r <= k {
            hits += 1;
        }
    }
    hits as f64 / ranks.len() as f64
}

/// Ids ordered by squared distance to `query`, ties by id, via a full
/// comparison sort on exact keys.
pub fn exhaustive_order(query: &[f64], items: &[Vec<f64>]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = items
        .iter()
        .enumerate()
        .map(|(id, e)| (e.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), id))
        .collect();
    keyed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    keyed.into_iter().map(|(_, id)| id).collect()
}
