//! Ranking metrics over 1-based target ranks.

use crate::error::{Error, Result};

/// Rank of one test case's target item.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankRecord {
    pub case: usize,
    /// 1-based.
    pub rank: usize,
    pub list_len: usize,
}

fn check(ranks: &[usize]) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::Domain("metric over an empty rank list"));
    }
    if ranks.contains(&0) {
        return Err(Error::Domain("ranks are 1-based"));
    }
    Ok(())
}

/// Mean reciprocal rank.
pub fn mrr(ranks: &[usize]) -> Result<f64> {
    check(ranks)?;
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Fraction of ranks within the top `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    check(ranks)?;
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}
