//! Softmax and attention invariants on random inputs.

use dgcf_core::autodiff::Tape;
use dgcf_core::model::{Aggregator, Forward, ModelConfig, ModelParams};
use dgcf_core::tensor::{softmax, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fixtures::random_params;

#[derive(Debug, Default)]
pub struct Invariants {
    pub cases: usize,
    pub positive: bool,
    pub max_sum_error: f64,
    pub max_shift_error: f64,
    pub max_uniform_error: f64,
}

impl Invariants {
    pub fn holds(&self) -> bool {
        self.cases > 0 && self.positive && self.max_sum_error <= 1e-12 && self.max_shift_error <= 1e-12 && self.max_uniform_error <= 1e-12
    }
}

fn attention(params: &ModelParams, cfg: &ModelConfig, anchor: &[f64], neighbors: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut tape = Tape::new();
    let a = tape.constant(DenseMatrix::column(anchor));
    let ns: Vec<_> = neighbors.iter().map(|n| tape.constant(DenseMatrix::column(n))).collect();
    let mut f = Forward::new(&mut tape, params, cfg);
    let (w, _) = f.attention_weights(a, &ns).unwrap();
    let out = f.second_order(dgcf_core::store::Side::User, a, &ns).unwrap();
    (tape.value(w).as_slice().to_vec(), tape.value(out).as_slice().to_vec())
}

pub fn run(cases: usize, seed: u64) -> Invariants {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inv = Invariants { positive: true, ..Invariants::default() };
    let cfg = ModelConfig { dim: 6, aggregator: Aggregator::Attention, ..ModelConfig::default() };
    let params = random_params(&cfg, &mut rng);
    for _ in 0..cases {
        inv.cases += 1;
        let n = rng.random_range(1..30);
        let spread = [1.0, 10.0, 300.0][rng.random_range(0..3)];
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..spread)).collect();
        let p = softmax(&DenseMatrix::column(&scores)).unwrap();
        inv.positive &= p.as_slice().iter().all(|&x| x > 0.0);
        inv.max_sum_error = inv.max_sum_error.max((p.sum() - 1.0).abs());
        let c = rng.random_range(-50.0..50.0);
        let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
        let q = softmax(&DenseMatrix::column(&shifted)).unwrap();
        inv.max_shift_error = inv.max_shift_error.max(p.max_abs_diff(&q));

        let anchor: Vec<f64> = (0..cfg.dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let neighbors: Vec<Vec<f64>> = (0..n).map(|_| (0..cfg.dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let (w, _) = attention(&params, &cfg, &anchor, &neighbors);
        inv.positive &= w.iter().all(|&x| x > 0.0);
        inv.max_sum_error = inv.max_sum_error.max((w.iter().sum::<f64>() - 1.0).abs());

        let same = vec![neighbors[0].clone(); n];
        let (w, out) = attention(&params, &cfg, &anchor, &same);
        let uniform = w.iter().map(|x| (x - 1.0 / n as f64).abs()).fold(0.0, f64::max);
        let passthrough = out.iter().zip(&same[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        inv.max_uniform_error = inv.max_uniform_error.max(uniform).max(passthrough);
    }
    inv
}
