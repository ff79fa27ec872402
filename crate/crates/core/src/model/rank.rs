use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::tensor::euclidean_distance;

fn by_distance_then_id(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Every item as `(id, distance)`, nearest first; equal distances are
/// ordered by ascending id.
pub fn rank_items<'a, I>(predicted: &[f64], items: I) -> Result<Vec<(usize, f64)>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut scored = distances(predicted, items)?;
    scored.sort_unstable_by(by_distance_then_id);
    Ok(scored)
}

/// The `k` nearest items, in the order [`rank_items`] would list them.
pub fn top_k<'a, I>(predicted: &[f64], items: I, k: usize) -> Result<Vec<(usize, f64)>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut scored = distances(predicted, items)?;
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by_distance_then_id);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_distance_then_id);
    Ok(scored)
}

/// 1-based position of `target` in [`rank_items`] order, without sorting.
pub fn rank_of<'a, I>(predicted: &[f64], items: I, target: usize) -> Result<usize>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let scored = distances(predicted, items)?;
    let key = *scored.get(target).ok_or(Error::Domain("target item out of range"))?;
    Ok(1 + scored.iter().filter(|s| by_distance_then_id(s, &key) == Ordering::Less).count())
}

fn distances<'a, I>(predicted: &[f64], items: I) -> Result<Vec<(usize, f64)>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = Vec::new();
    for (id, emb) in items.into_iter().enumerate() {
        if emb.len() != predicted.len() {
            return Err(Error::Dimension { op: "rank_items", left: (predicted.len(), 1), right: (emb.len(), 1) });
        }
        out.push((id, euclidean_distance(predicted, emb)));
    }
    if out.is_empty() {
        return Err(Error::Domain("no items to rank"));
    }
    Ok(out)
}
