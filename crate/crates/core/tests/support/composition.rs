//! The tape-recorded model step against the plain-vector reference, on
//! inputs read straight from a warmed snapshot.

use dgcf_core::autodiff::Tape;
use dgcf_core::model::{forward_step, Aggregator, Mechanism, Mechanisms, ModelConfig};
use dgcf_core::store::{GraphSnapshot, Interaction, Side};
use dgcf_core::trainer::teacher_force;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fixtures::{random_params, small_config, warm_snapshot};
use super::reference::{Inputs, Reference};

fn recent(snap: &GraphSnapshot, side: Side, id: usize, cap: usize) -> Vec<Vec<f64>> {
    let all: Vec<Vec<f64>> = snap.history(side, id).unwrap().iter().map(|e| e.embedding.to_vec()).collect();
    all[all.len().saturating_sub(cap)..].to_vec()
}

fn reference_inputs(snap: &GraphSnapshot, cfg: &ModelConfig, x: &Interaction, future_dt: f64) -> Inputs {
    let user = snap.state(Side::User, x.user).unwrap();
    let item = snap.state(Side::Item, x.item).unwrap();
    let split = cfg.user_feature_dim();
    Inputs {
        user_prev: user.embedding.to_vec(),
        item_prev: item.embedding.to_vec(),
        user_features: x.features[..split].to_vec(),
        item_features: x.features[split..].to_vec(),
        user_neighbors: recent(snap, Side::Item, x.item, cfg.aggregation_size),
        item_neighbors: recent(snap, Side::User, x.user, cfg.aggregation_size),
        user_dt: user.last_time.map_or(0.0, |t| x.time - t),
        item_dt: item.last_time.map_or(0.0, |t| x.time - t),
        future_dt,
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Configurations covered: every aggregator with all mechanisms, plus each
/// single-mechanism ablation under attention.
pub fn configs() -> Vec<(String, ModelConfig)> {
    let mut out: Vec<(String, ModelConfig)> =
        Aggregator::ALL.iter().map(|&a| (a.name().to_string(), small_config(a))).collect();
    for m in Mechanism::ALL {
        let cfg = ModelConfig { mechanisms: Mechanisms::ALL.without(m), ..small_config(Aggregator::Attention) };
        out.push((format!("without {}", m.name()), cfg));
    }
    out
}

/// Largest deviation (embeddings, projections, relative loss) over `steps`
/// interactions applied one after another to a warmed snapshot.
pub fn max_deviation(cfg: &ModelConfig, steps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = random_params(cfg, &mut rng);
    let (mut snap, warm) = warm_snapshot(cfg, &params, 6, 5, 40, &mut rng);
    let mut t = warm.last().map_or(0.0, |x| x.time);
    let reference = Reference { cfg, params: &params };
    let mut worst: f64 = 0.0;
    for i in 0..steps {
        t += rng.random_range(0.0..2.0);
        let features = (0..cfg.feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Interaction::new(warm.len() + i, rng.random_range(0..6), rng.random_range(0..5), t).with_features(features);
        let future_dt = rng.random_range(0.0..3.0);

        let mut tape = Tape::new();
        let (_, out) = forward_step(&snap, &x, future_dt, &params, cfg, &mut tape).unwrap();
        let want = reference.step(&reference_inputs(&snap, cfg, &x, future_dt));
        let value = |id| tape.value(id).as_slice().to_vec();
        worst = worst
            .max(max_diff(&value(out.user), &want.user))
            .max(max_diff(&value(out.item), &want.item))
            .max(max_diff(&value(out.projected_user), &want.projected_user))
            .max(max_diff(&value(out.projected_item), &want.projected_item))
            .max((tape.value(out.loss).get(0, 0) - want.loss).abs() / want.loss.abs().max(1.0));

        teacher_force(&params, cfg, &mut snap, std::slice::from_ref(&x)).unwrap();
    }
    worst
}
