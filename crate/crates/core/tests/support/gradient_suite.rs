//! Finite-difference check of every kernel and of the composed loss at
//! d = 8, T = 4.

use dgcf_core::autodiff::{NodeId, Tape};
use dgcf_core::model::{Aggregator, Forward, LossNorm, Mechanism, ModelConfig, ModelParams, PredictionTarget, StepInputs};
use dgcf_core::store::Side;
use dgcf_core::tensor::{Activation, DenseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fixtures::{random_params, random_vector, small_config};
use super::gradcheck::{check, contract, Report};

const T: usize = 4;

struct Case {
    cfg: ModelConfig,
    params: ModelParams,
    weights: DenseMatrix,
    rng: ChaCha8Rng,
}

impl Case {
    fn new(cfg: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&cfg, &mut rng);
        let weights = DenseMatrix::column(&random_vector(&mut rng, cfg.dim));
        Case { cfg, params, weights, rng }
    }

    fn vector(&mut self, n: usize) -> DenseMatrix {
        DenseMatrix::column(&random_vector(&mut self.rng, n))
    }

    fn feature_dim(&self, side: Side) -> usize {
        match side {
            Side::User => self.cfg.user_feature_dim(),
            Side::Item => self.cfg.item_feature_dim(),
        }
    }
}

fn step_inputs(ids: &[NodeId]) -> StepInputs {
    StepInputs {
        user_prev: ids[0],
        item_prev: ids[1],
        user_features: ids[2],
        item_features: ids[3],
        user_neighbors: ids[4..4 + T].to_vec(),
        item_neighbors: ids[4 + T..4 + 2 * T].to_vec(),
        user_dt: 1.3,
        item_dt: 0.4,
        future_dt: 2.2,
    }
}

fn step_case_inputs(case: &mut Case) -> Vec<DenseMatrix> {
    let d = case.cfg.dim;
    let mut inputs = vec![
        case.vector(d),
        case.vector(d),
        case.vector(case.feature_dim(Side::User)),
        case.vector(case.feature_dim(Side::Item)),
    ];
    for _ in 0..2 * T {
        inputs.push(case.vector(d));
    }
    inputs
}

/// Every labelled check with its report.
pub fn run() -> Vec<(String, Report)> {
    let mut out = Vec::new();
    let mut seed = 0;
    let mut next_seed = || {
        seed += 1;
        seed
    };

    for side in [Side::User, Side::Item] {
        for theta in [Activation::Identity, Activation::Tanh, Activation::Sigmoid, Activation::LeakyRelu(0.01)] {
            let mut case = Case::new(ModelConfig { theta, ..small_config(Aggregator::Attention) }, next_seed());
            let inputs = vec![case.vector(case.cfg.dim), case.vector(case.feature_dim(side))];
            let (cfg, w) = (&case.cfg, &case.weights);
            let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
                let y = Forward::new(tape, p, cfg).zero_order(side, ids[0], 1.7, ids[1]).unwrap();
                contract(tape, y, w)
            };
            out.push((format!("zero_order {side} {theta:?}"), check("zero_order", &f, &case.params, &inputs)));
        }

        let mut case = Case::new(ModelConfig { phi: Activation::Tanh, ..small_config(Aggregator::Attention) }, next_seed());
        let inputs = vec![case.vector(case.cfg.dim), case.vector(case.feature_dim(side.other()))];
        let (cfg, w) = (&case.cfg, &case.weights);
        let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
            let y = Forward::new(tape, p, cfg).first_order(side, ids[0], ids[1]).unwrap();
            contract(tape, y, w)
        };
        out.push((format!("first_order {side}"), check("first_order", &f, &case.params, &inputs)));

        for agg in Aggregator::ALL {
            for n in [1, T] {
                let mut case = Case::new(small_config(agg), next_seed());
                let inputs: Vec<DenseMatrix> = (0..=n).map(|_| case.vector(case.cfg.dim)).collect();
                let (cfg, w) = (&case.cfg, &case.weights);
                let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
                    let y = Forward::new(tape, p, cfg).second_order(side, ids[0], &ids[1..]).unwrap();
                    contract(tape, y, w)
                };
                out.push((
                    format!("second_order {side} {} n={n}", agg.name()),
                    check("second_order", &f, &case.params, &inputs),
                ));
            }
        }

        for disabled in [None, Some(Mechanism::Zero), Some(Mechanism::First), Some(Mechanism::Second)] {
            let mut cfg = small_config(Aggregator::Attention);
            if let Some(m) = disabled {
                cfg.mechanisms = cfg.mechanisms.without(m);
            }
            let mut case = Case::new(cfg, next_seed());
            let inputs: Vec<DenseMatrix> = (0..3).map(|_| case.vector(case.cfg.dim)).collect();
            let (cfg, w) = (&case.cfg, &case.weights);
            let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
                let y = Forward::new(tape, p, cfg).fuse(side, ids[0], ids[1], ids[2]).unwrap();
                contract(tape, y, w)
            };
            out.push((format!("fuse {side} without {disabled:?}"), check("fuse", &f, &case.params, &inputs)));
        }

        let mut case = Case::new(small_config(Aggregator::Attention), next_seed());
        let inputs = vec![case.vector(case.cfg.dim)];
        let (cfg, w) = (&case.cfg, &case.weights);
        let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
            let y = Forward::new(tape, p, cfg).mlp(side, ids[0]).unwrap();
            contract(tape, y, w)
        };
        out.push((format!("mlp {side}"), check("mlp", &f, &case.params, &inputs)));
    }

    let mut case = Case::new(small_config(Aggregator::Attention), next_seed());
    let inputs: Vec<DenseMatrix> = (0..T + 1).map(|_| case.vector(case.cfg.dim)).collect();
    let weights = DenseMatrix::column(&random_vector(&mut case.rng, T));
    let cfg = &case.cfg;
    let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
        let (alpha, _) = Forward::new(tape, p, cfg).attention_weights(ids[0], &ids[1..]).unwrap();
        contract(tape, alpha, &weights)
    };
    out.push(("attention_weights".into(), check("attention_weights", &f, &case.params, &inputs)));

    let mut case = Case::new(small_config(Aggregator::Attention), next_seed());
    let inputs = vec![case.vector(case.cfg.dim)];
    let (cfg, w) = (&case.cfg, &case.weights);
    let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
        let y = Forward::new(tape, p, cfg).project_user(ids[0], 0.7).unwrap();
        contract(tape, y, w)
    };
    out.push(("project_user".into(), check("project_user", &f, &case.params, &inputs)));

    let mut case = Case::new(small_config(Aggregator::Attention), next_seed());
    let inputs = vec![case.vector(case.cfg.dim), case.vector(case.feature_dim(Side::User)), case.vector(case.feature_dim(Side::Item))];
    let (cfg, w) = (&case.cfg, &case.weights);
    let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
        let y = Forward::new(tape, p, cfg).project_item(ids[0], ids[1], ids[2]).unwrap();
        contract(tape, y, w)
    };
    out.push(("project_item".into(), check("project_item", &f, &case.params, &inputs)));

    for norm in [LossNorm::Squared, LossNorm::Euclidean] {
        let mut case = Case::new(ModelConfig { loss_norm: norm, lambda_u: 0.7, alpha_v: 1.3, ..small_config(Aggregator::Attention) }, next_seed());
        let inputs: Vec<DenseMatrix> = (0..6).map(|_| case.vector(case.cfg.dim)).collect();
        let cfg = &case.cfg;
        let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
            Forward::new(tape, p, cfg).evolutionary_loss(ids[0], ids[1], ids[2], ids[3], ids[4], ids[5]).unwrap()
        };
        out.push((format!("evolutionary_loss {norm:?}"), check("evolutionary_loss", &f, &case.params, &inputs)));
    }

    for agg in Aggregator::ALL {
        for target in [PredictionTarget::Current, PredictionTarget::Upcoming] {
            for norm in [LossNorm::Squared, LossNorm::Euclidean] {
                let cfg = ModelConfig { target, loss_norm: norm, ..small_config(agg) };
                let mut case = Case::new(cfg, next_seed());
                let inputs = step_case_inputs(&mut case);
                let cfg = &case.cfg;
                let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
                    Forward::new(tape, p, cfg).step(&step_inputs(ids)).unwrap().loss
                };
                out.push((
                    format!("step loss {} {target:?} {norm:?}", agg.name()),
                    check("step", &f, &case.params, &inputs),
                ));
            }
        }
    }

    // two steps chained through the user's and item's embeddings, as inside
    // one back-propagation segment
    for agg in Aggregator::ALL {
        let mut case = Case::new(small_config(agg), next_seed());
        let inputs = step_case_inputs(&mut case);
        let cfg = &case.cfg;
        let f = |tape: &mut Tape, p: &ModelParams, ids: &[NodeId]| {
            let first = Forward::new(tape, p, cfg).step(&step_inputs(ids)).unwrap();
            let mut next = step_inputs(ids);
            next.user_prev = first.user;
            next.item_prev = first.item;
            let second = Forward::new(tape, p, cfg).step(&next).unwrap();
            tape.add(first.loss, second.loss).unwrap()
        };
        out.push((format!("chained steps {}", agg.name()), check("chained", &f, &case.params, &inputs)));
    }
    out
}
