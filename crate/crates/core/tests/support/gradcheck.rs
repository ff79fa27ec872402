//! Central finite differences against the tape's reverse pass.

use dgcf_core::autodiff::{NodeId, Tape};
use dgcf_core::model::{ModelParams, Param};
use dgcf_core::tensor::DenseMatrix;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Magnitudes below this are compared absolutely.
pub const FLOOR: f64 = 1e-5;

/// Records a scalar from parameters and tracked inputs.
pub trait Scalar: Fn(&mut Tape, &ModelParams, &[NodeId]) -> NodeId {}
impl<F: Fn(&mut Tape, &ModelParams, &[NodeId]) -> NodeId> Scalar for F {}

#[derive(Debug, Default)]
pub struct Report {
    pub checked: usize,
    pub worst: f64,
    pub worst_at: String,
}

impl Report {
    fn record(&mut self, analytic: f64, numeric: f64, at: impl FnOnce() -> String) {
        self.checked += 1;
        let err = relative_error(analytic, numeric);
        if err > self.worst || self.worst_at.is_empty() {
            self.worst = err;
            self.worst_at = at();
        }
    }

    pub fn merge(&mut self, other: Report) {
        self.checked += other.checked;
        if other.worst > self.worst || self.worst_at.is_empty() {
            self.worst = other.worst;
            self.worst_at = other.worst_at;
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.worst <= TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn evaluate(f: &dyn Scalar, params: &ModelParams, inputs: &[DenseMatrix]) -> f64 {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|x| tape.input(x.clone())).collect();
    let root = f(&mut tape, params, &ids);
    tape.value(root).get(0, 0)
}

/// Compares every entry of every parameter the scalar touches, and every
/// entry of every input.
pub fn check(label: &str, f: &dyn Scalar, params: &ModelParams, inputs: &[DenseMatrix]) -> Report {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|x| tape.input(x.clone())).collect();
    let root = f(&mut tape, params, &ids);
    let grads = tape.backward(root).unwrap();
    let mut report = Report::default();

    for p in Param::all() {
        let Some(node) = tape.param_node(p.slot()) else { continue };
        let value = params.get(p);
        let analytic = grads.wrt(node).cloned().unwrap_or_else(|| DenseMatrix::zeros(value.rows(), value.cols()));
        for i in 0..value.len() {
            let mut plus = params.clone();
            plus.get_mut(p).as_mut_slice()[i] += STEP;
            let mut minus = params.clone();
            minus.get_mut(p).as_mut_slice()[i] -= STEP;
            let numeric = (evaluate(f, &plus, inputs) - evaluate(f, &minus, inputs)) / (2.0 * STEP);
            report.record(analytic.as_slice()[i], numeric, || format!("{label}: {}[{i}]", p.name()));
        }
    }

    for (k, (id, x)) in ids.iter().zip(inputs).enumerate() {
        let analytic = grads.wrt(*id).cloned().unwrap_or_else(|| DenseMatrix::zeros(x.rows(), x.cols()));
        for i in 0..x.len() {
            let mut plus = inputs.to_vec();
            plus[k].as_mut_slice()[i] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].as_mut_slice()[i] -= STEP;
            let numeric = (evaluate(f, params, &plus) - evaluate(f, params, &minus)) / (2.0 * STEP);
            report.record(analytic.as_slice()[i], numeric, || format!("{label}: input {k}[{i}]"));
        }
    }
    report
}

/// `sum(weights * x)`, turning a vector output into a scalar that exercises
/// every component.
pub fn contract(tape: &mut Tape, x: NodeId, weights: &DenseMatrix) -> NodeId {
    let w = tape.constant(weights.clone());
    let prod = tape.mul(x, w).unwrap();
    tape.sum(prod)
}
