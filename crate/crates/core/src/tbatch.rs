//! Entity-disjoint, order-preserving batching of an interaction log.
//!
//! Each interaction goes to batch `max(B(u) + 1, B(v) + 1)`, where `B(x)` is
//! the batch that last received entity `x` (`-1` before it is seen), and both
//! `B(u)` and `B(v)` then move to that batch. Members of one batch touch
//! pairwise distinct users and items, so they can be processed in any order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::store::{Interaction, Side};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TBatchSchedule {
    /// Positions into the scheduled log, in log order within each batch.
    batches: Vec<Vec<usize>>,
    user_batch: Vec<Option<usize>>,
    item_batch: Vec<Option<usize>>,
}

impl TBatchSchedule {
    pub fn from_batches(batches: Vec<Vec<usize>>) -> Self {
        TBatchSchedule { batches, user_batch: Vec::new(), item_batch: Vec::new() }
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn batches_mut(&mut self) -> &mut [Vec<usize>] {
        &mut self.batches
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// `B(side, id)`: the last batch the entity was placed in.
    pub fn last_batch(&self, side: Side, id: usize) -> Option<usize> {
        let table = match side {
            Side::User => &self.user_batch,
            Side::Item => &self.item_batch,
        };
        table.get(id).copied().flatten()
    }

    /// Batches as lists of interaction `seq` values.
    pub fn seq_batches(&self, log: &[Interaction]) -> Vec<Vec<usize>> {
        self.batches.iter().map(|b| b.iter().map(|&p| log[p].seq).collect()).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.batches.iter().map(Vec::len).collect()
    }
}

/// Checks that `log` is sorted by `(time, seq)`.
pub fn check_sorted(log: &[Interaction]) -> Result<()> {
    for (i, w) in log.windows(2).enumerate() {
        let ordered = w[0].time < w[1].time || (w[0].time == w[1].time && w[0].seq < w[1].seq);
        if !ordered {
            return Err(Error::Unsorted { position: i + 1 });
        }
    }
    Ok(())
}

pub fn assign_batches(log: &[Interaction]) -> Result<TBatchSchedule> {
    check_sorted(log)?;
    let users = log.iter().map(|x| x.user + 1).max().unwrap_or(0);
    let items = log.iter().map(|x| x.item + 1).max().unwrap_or(0);
    let mut user_batch: Vec<Option<usize>> = vec![None; users];
    let mut item_batch: Vec<Option<usize>> = vec![None; items];
    let mut batches: Vec<Vec<usize>> = Vec::new();

    for (pos, x) in log.iter().enumerate() {
        let next = |b: Option<usize>| b.map_or(0, |b| b + 1);
        let k = next(user_batch[x.user]).max(next(item_batch[x.item]));
        if k == batches.len() {
            batches.push(Vec::new());
        }
        batches[k].push(pos);
        user_batch[x.user] = Some(k);
        item_batch[x.item] = Some(k);
    }
    Ok(TBatchSchedule { batches, user_batch, item_batch })
}

/// First schedule invariant broken, in `seq` terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Missing { seq: usize },
    Duplicate { seq: usize },
    OutOfRange { position: usize },
    SharedEntity { batch: usize, side: Side, id: usize, seqs: (usize, usize) },
    OrderBroken { side: Side, id: usize, earlier: usize, later: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing { seq } => write!(f, "interaction {seq} is not scheduled"),
            Violation::Duplicate { seq } => write!(f, "interaction {seq} is scheduled twice"),
            Violation::OutOfRange { position } => write!(f, "batch entry {position} is outside the log"),
            Violation::SharedEntity { batch, side, id, seqs } => write!(
                f,
                "batch {batch}: {side} {id} appears in interactions {} and {}",
                seqs.0, seqs.1
            ),
            Violation::OrderBroken { side, id, earlier, later } => write!(
                f,
                "{side} {id}: interaction {later} is not batched after interaction {earlier}"
            ),
        }
    }
}

/// Verifies coverage, entity-disjointness and per-entity temporal order.
pub fn validate_schedule(schedule: &TBatchSchedule, log: &[Interaction]) -> core::result::Result<(), Violation> {
    let mut batch_of: Vec<Option<usize>> = vec![None; log.len()];
    for (b, batch) in schedule.batches.iter().enumerate() {
        for &pos in batch {
            let slot = batch_of.get_mut(pos).ok_or(Violation::OutOfRange { position: pos })?;
            if slot.is_some() {
                return Err(Violation::Duplicate { seq: log[pos].seq });
            }
            *slot = Some(b);
        }
    }
    let batch_of: Vec<usize> = batch_of
        .iter()
        .enumerate()
        .map(|(pos, b)| b.ok_or(Violation::Missing { seq: log[pos].seq }))
        .collect::<core::result::Result<_, _>>()?;

    let users = log.iter().map(|x| x.user + 1).max().unwrap_or(0);
    let items = log.iter().map(|x| x.item + 1).max().unwrap_or(0);

    for (b, batch) in schedule.batches.iter().enumerate() {
        let mut seen_user: Vec<Option<usize>> = vec![None; users];
        let mut seen_item: Vec<Option<usize>> = vec![None; items];
        for &pos in batch {
            let x = &log[pos];
            for (side, id, seen) in [(Side::User, x.user, &mut seen_user), (Side::Item, x.item, &mut seen_item)] {
                if let Some(other) = seen[id] {
                    return Err(Violation::SharedEntity { batch: b, side, id, seqs: (log[other].seq, x.seq) });
                }
                seen[id] = Some(pos);
            }
        }
    }

    // log order is time order
    let mut last_user: Vec<Option<usize>> = vec![None; users];
    let mut last_item: Vec<Option<usize>> = vec![None; items];
    for (pos, x) in log.iter().enumerate() {
        for (side, id, last) in [(Side::User, x.user, &mut last_user), (Side::Item, x.item, &mut last_item)] {
            if let Some(prev) = last[id] {
                if batch_of[prev] >= batch_of[pos] {
                    return Err(Violation::OrderBroken { side, id, earlier: log[prev].seq, later: x.seq });
                }
            }
            last[id] = Some(pos);
        }
    }
    Ok(())
}
