use dgcf_core::model::{Aggregator, FeatureLayout, ModelConfig, ModelParams, Param};
use dgcf_core::store::{GraphSnapshot, Interaction};
use dgcf_core::trainer::teacher_force;
use rand::Rng;

/// Time-sorted log with occasional equal timestamps. Every interaction
/// carries `feature_dim` features.
pub fn random_log<R: Rng>(rng: &mut R, n: usize, users: usize, items: usize, feature_dim: usize) -> Vec<Interaction> {
    let mut t = 0.0;
    (0..n)
        .map(|seq| {
            if rng.random::<f64>() < 0.8 {
                t += rng.random_range(0.1..3.0);
            }
            let features = (0..feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            Interaction::new(seq, rng.random_range(0..users), rng.random_range(0..items), t).with_features(features)
        })
        .collect()
}

/// d = 8, T = 4, five raw features split 2 / 3 between user and item.
pub fn small_config(aggregator: Aggregator) -> ModelConfig {
    ModelConfig {
        dim: 8,
        feature_dim: 5,
        features: FeatureLayout::Split(2),
        aggregator,
        aggregation_size: 4,
        time_scale: Some(2.0),
        ..ModelConfig::default()
    }
}

/// Initialized parameters with every entry, biases included, moved by a
/// uniform offset so that no tensor is special.
pub fn random_params<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> ModelParams {
    let mut params = ModelParams::init(cfg, rng).unwrap();
    for p in Param::all() {
        for v in params.get_mut(p).as_mut_slice() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    params
}

/// Fresh N(0,1) state warmed by `warm` random interactions so that
/// histories are populated.
pub fn warm_snapshot<R: Rng>(
    cfg: &ModelConfig,
    params: &ModelParams,
    users: usize,
    items: usize,
    warm: usize,
    rng: &mut R,
) -> (GraphSnapshot, Vec<Interaction>) {
    let mut snap = GraphSnapshot::init(users, items, cfg.dim, cfg.aggregation_size, rng).unwrap();
    let log = random_log(rng, warm, users, items, cfg.feature_dim);
    teacher_force(params, cfg, &mut snap, &log).unwrap();
    (snap, log)
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
