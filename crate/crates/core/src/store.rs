//! Interaction records and the evolving per-entity state of the bipartite graph.

use alloc::collections::VecDeque;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One timestamped user-item event.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub seq: usize,
    pub user: usize,
    pub item: usize,
    pub time: f64,
    pub features: Vec<f64>,
}

impl Interaction {
    pub fn new(seq: usize, user: usize, item: usize, time: f64) -> Self {
        Interaction { seq, user, item, time, features: Vec::new() }
    }

    pub fn with_features(mut self, features: Vec<f64>) -> Self {
        self.features = features;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::User => Side::Item,
            Side::Item => Side::User,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::User => "user",
            Side::Item => "item",
        })
    }
}

pub type Embedding = Arc<[f64]>;

#[derive(Clone, Debug, PartialEq)]
pub struct EntityState {
    pub embedding: Embedding,
    /// Time of the previous interaction; `None` before the first one.
    pub last_time: Option<f64>,
}

impl EntityState {
    /// Elapsed time since the previous interaction, zero for a first one.
    pub fn elapsed(&self, now: f64) -> f64 {
        self.last_time.map_or(0.0, |last| now - last)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEntry {
    pub partner: usize,
    pub time: f64,
    pub embedding: Embedding,
}

/// Bounded chronological record of an entity's past partners.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborHistory {
    capacity: usize,
    entries: VecDeque<HistoryEntry>,
}

impl NeighborHistory {
    pub fn new(capacity: usize) -> Self {
        NeighborHistory { capacity, entries: VecDeque::with_capacity(capacity.min(64)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: HistoryEntry) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn iter(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Which embedding a history entry contributes when aggregated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HistoryPolicy {
    /// The partner's embedding at the moment the edge formed.
    #[default]
    Snapshot,
    /// The partner's current embedding.
    Live,
}

/// Dynamic state of the whole graph at one logical time.
///
/// `user_history[u]` holds the items `u` interacted with and
/// `item_history[v]` the users that interacted with `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSnapshot {
    dim: usize,
    pub users: Vec<EntityState>,
    pub items: Vec<EntityState>,
    pub user_history: Vec<NeighborHistory>,
    pub item_history: Vec<NeighborHistory>,
    pub now: f64,
}

impl GraphSnapshot {
    /// Every embedding drawn i.i.d. from N(0, 1).
    pub fn init<R: Rng + ?Sized>(
        num_users: usize,
        num_items: usize,
        dim: usize,
        capacity: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1"));
        }
        let mut draw = |n: usize| -> Vec<EntityState> {
            (0..n)
                .map(|_| {
                    let e: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    EntityState { embedding: e.into(), last_time: None }
                })
                .collect()
        };
        let users = draw(num_users);
        let items = draw(num_items);
        Ok(GraphSnapshot {
            dim,
            users,
            items,
            user_history: (0..num_users).map(|_| NeighborHistory::new(capacity)).collect(),
            item_history: (0..num_items).map(|_| NeighborHistory::new(capacity)).collect(),
            now: 0.0,
        })
    }

    /// Reassembles a snapshot, checking that every table agrees in length
    /// and every embedding has `dim` entries.
    pub fn from_parts(
        dim: usize,
        users: Vec<EntityState>,
        items: Vec<EntityState>,
        user_history: Vec<NeighborHistory>,
        item_history: Vec<NeighborHistory>,
        now: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1"));
        }
        if users.len() != user_history.len() || items.len() != item_history.len() {
            return Err(Error::Contract("one neighbor history per entity"));
        }
        let states = users.iter().chain(&items).map(|s| s.embedding.len());
        let entries = user_history.iter().chain(&item_history).flat_map(|h| h.iter().map(|e| e.embedding.len()));
        if let Some(bad) = states.chain(entries).find(|&n| n != dim) {
            return Err(Error::Dimension { op: "snapshot", left: (dim, 1), right: (bad, 1) });
        }
        Ok(GraphSnapshot { dim, users, items, user_history, item_history, now })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn state(&self, side: Side, id: usize) -> Result<&EntityState> {
        let table = match side {
            Side::User => &self.users,
            Side::Item => &self.items,
        };
        table.get(id).ok_or(Error::UnknownEntity { side, id })
    }

    pub fn history(&self, side: Side, id: usize) -> Result<&NeighborHistory> {
        let table = match side {
            Side::User => &self.user_history,
            Side::Item => &self.item_history,
        };
        table.get(id).ok_or(Error::UnknownEntity { side, id })
    }

    /// Checks that both entities exist and that `x` does not go back in time
    /// for either of them.
    pub fn check_interaction(&self, x: &Interaction) -> Result<()> {
        for (side, id) in [(Side::User, x.user), (Side::Item, x.item)] {
            if let Some(last) = self.state(side, id)?.last_time {
                if x.time < last {
                    return Err(Error::TimeRegression { seq: x.seq, time: x.time, last });
                }
            }
        }
        Ok(())
    }

    /// Applies the outcome of interaction `x`: each side's history gains the
    /// partner with its pre-update embedding, then both embeddings are
    /// replaced and the clocks advance.
    pub fn record_interaction(
        &mut self,
        x: &Interaction,
        new_user: Embedding,
        new_item: Embedding,
    ) -> Result<()> {
        self.check_interaction(x)?;
        if new_user.len() != self.dim || new_item.len() != self.dim {
            return Err(Error::Dimension {
                op: "record_interaction",
                left: (self.dim, 1),
                right: (new_user.len().max(new_item.len()), 1),
            });
        }
        let old_user = self.users[x.user].embedding.clone();
        let old_item = self.items[x.item].embedding.clone();
        self.user_history[x.user].push(HistoryEntry { partner: x.item, time: x.time, embedding: old_item });
        self.item_history[x.item].push(HistoryEntry { partner: x.user, time: x.time, embedding: old_user });
        self.users[x.user] = EntityState { embedding: new_user, last_time: Some(x.time) };
        self.items[x.item] = EntityState { embedding: new_item, last_time: Some(x.time) };
        if x.time > self.now {
            self.now = x.time;
        }
        Ok(())
    }

    /// The most recent history entries of `(side, id)`, oldest first.
    ///
    /// `exclude` drops entries whose partner is that id (for instance the
    /// entity on the other end of the current interaction). Under
    /// [`HistoryPolicy::Live`] each entry carries the partner's current
    /// embedding instead of its snapshot.
    pub fn neighbors_for(
        &self,
        side: Side,
        id: usize,
        exclude: Option<usize>,
        policy: HistoryPolicy,
    ) -> Result<Vec<HistoryEntry>> {
        let history = self.history(side, id)?;
        let partner_side = side.other();
        history
            .iter()
            .filter(|e| Some(e.partner) != exclude)
            .map(|e| match policy {
                HistoryPolicy::Snapshot => Ok(e.clone()),
                HistoryPolicy::Live => Ok(HistoryEntry {
                    embedding: self.state(partner_side, e.partner)?.embedding.clone(),
                    ..e.clone()
                }),
            })
            .collect()
    }

    /// Forgets clocks and histories but keeps the embeddings, so the
    /// interaction stream can be replayed from its start.
    pub fn rewind(&mut self) {
        for s in self.users.iter_mut().chain(self.items.iter_mut()) {
            s.last_time = None;
        }
        for h in self.user_history.iter_mut().chain(self.item_history.iter_mut()) {
            h.clear();
        }
        self.now = 0.0;
    }

    /// All item embeddings in id order.
    pub fn item_embeddings(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.items.iter().map(|s| &*s.embedding)
    }
}
