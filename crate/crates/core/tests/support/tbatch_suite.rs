//! Schedule validity and batched-versus-sequential equivalence.

use dgcf_core::model::{Aggregator, ModelConfig};
use dgcf_core::store::{GraphSnapshot, Interaction, Side};
use dgcf_core::tbatch::{assign_batches, validate_schedule, Violation};
use dgcf_core::trainer::teacher_force;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fixtures::{random_log, random_params};

pub struct Equivalence {
    pub batches: usize,
    pub validity: Result<(), Violation>,
    pub max_abs_diff: f64,
    pub histories_equal: bool,
}

/// Runs `n` random interactions over `users x items` once in log order and
/// once batch by batch with each batch shuffled, from identical states.
pub fn batched_equals_sequential(n: usize, users: usize, items: usize, aggregator: Aggregator, seed: u64) -> Equivalence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig { dim: 16, feature_dim: 2, aggregator, aggregation_size: 20, time_scale: Some(1.5), ..ModelConfig::default() };
    let params = random_params(&cfg, &mut rng);
    let log = random_log(&mut rng, n, users, items, cfg.feature_dim);
    let start = GraphSnapshot::init(users, items, cfg.dim, cfg.aggregation_size, &mut rng).unwrap();

    let schedule = assign_batches(&log).unwrap();
    let validity = validate_schedule(&schedule, &log);
    let mut reordered: Vec<Interaction> = Vec::with_capacity(n);
    for batch in schedule.batches() {
        let mut members: Vec<&Interaction> = batch.iter().map(|&p| &log[p]).collect();
        members.shuffle(&mut rng);
        reordered.extend(members.into_iter().cloned());
    }

    let mut sequential = start.clone();
    teacher_force(&params, &cfg, &mut sequential, &log).unwrap();
    let mut batched = start;
    teacher_force(&params, &cfg, &mut batched, &reordered).unwrap();

    let mut max_abs_diff: f64 = 0.0;
    for side in [Side::User, Side::Item] {
        let count = if side == Side::User { users } else { items };
        for id in 0..count {
            let a = sequential.state(side, id).unwrap();
            let b = batched.state(side, id).unwrap();
            for (x, y) in a.embedding.iter().zip(b.embedding.iter()) {
                max_abs_diff = max_abs_diff.max((x - y).abs());
            }
        }
    }
    let histories_equal = sequential.user_history == batched.user_history && sequential.item_history == batched.item_history;
    Equivalence { batches: schedule.len(), validity, max_abs_diff, histories_equal }
}

/// `(u1,v1), (u1,v2), (u2,v1)` as 0-based ids with seq 1..=3.
pub fn hand_fixture() -> Vec<Vec<usize>> {
    let log: Vec<Interaction> = [(0, 0), (0, 1), (1, 0)]
        .iter()
        .enumerate()
        .map(|(i, &(u, v))| Interaction::new(i + 1, u, v, i as f64))
        .collect();
    assign_batches(&log).unwrap().seq_batches(&log)
}
