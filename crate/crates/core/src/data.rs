//! Dataset statistics, chronological splits and the planted-cluster
//! synthetic generator.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::store::Interaction;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub num_users: usize,
    pub num_items: usize,
    pub num_interactions: usize,
    pub feature_dim: usize,
    /// Fraction of interactions whose (user, item) pair occurred earlier.
    pub action_repetition: f64,
}

impl DatasetMeta {
    /// Assumes dense 0-based ids.
    pub fn of(log: &[Interaction]) -> Self {
        DatasetMeta {
            num_users: log.iter().map(|x| x.user + 1).max().unwrap_or(0),
            num_items: log.iter().map(|x| x.item + 1).max().unwrap_or(0),
            num_interactions: log.len(),
            feature_dim: log.iter().map(|x| x.features.len()).max().unwrap_or(0),
            action_repetition: action_repetition(log),
        }
    }
}

pub fn action_repetition(log: &[Interaction]) -> f64 {
    if log.is_empty() {
        return 0.0;
    }
    let mut seen = BTreeSet::new();
    let repeats = log.iter().filter(|x| !seen.insert((x.user, x.item))).count();
    repeats as f64 / log.len() as f64
}

/// Contiguous train / validation / test ranges over a chronological log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl Splits {
    /// Fewer than ten interactions cannot honour the proportions.
    pub fn is_degenerate(&self) -> bool {
        self.test.end < 10
    }
}

/// Boundaries at `floor(0.8 n)` and `floor(0.9 n)`.
pub fn split_80_10_10(n: usize) -> Splits {
    let a = n * 8 / 10;
    let b = n * 9 / 10;
    Splits { train: 0..a, validation: a..b, test: b..n }
}

/// Shape of a planted-cluster dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub clusters: usize,
    pub events: usize,
    /// Probability that an event ignores the clusters and picks an item
    /// uniformly from the whole catalogue.
    pub repeat_prob: f64,
}

impl SyntheticSpec {
    pub fn user_cluster(&self, user: usize) -> usize {
        user / (self.users / self.clusters)
    }

    pub fn item_cluster(&self, item: usize) -> usize {
        item / (self.items / self.clusters)
    }
}

/// Users and items are split into `clusters` contiguous, equally sized
/// blocks. Each event picks a user uniformly; with probability
/// `1 - repeat_prob` its item comes uniformly from the user's own block,
/// otherwise uniformly from all items. Event `i` happens at time `i`.
pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Vec<Interaction>> {
    let SyntheticSpec { users, items, clusters, events, repeat_prob } = *spec;
    if clusters == 0 || users % clusters != 0 || items % clusters != 0 || users == 0 || items == 0 {
        return Err(Error::Config("clusters must evenly divide users and items"));
    }
    if !(0.0..=1.0).contains(&repeat_prob) {
        return Err(Error::Config("repeat probability must lie in [0, 1]"));
    }
    let per_cluster = items / clusters;
    let mut out = Vec::with_capacity(events);
    for i in 0..events {
        let user = rng.random_range(0..users);
        let item = if rng.random::<f64>() < repeat_prob {
            rng.random_range(0..items)
        } else {
            spec.user_cluster(user) * per_cluster + rng.random_range(0..per_cluster)
        };
        out.push(Interaction::new(i, user, item, i as f64));
    }
    Ok(out)
}
