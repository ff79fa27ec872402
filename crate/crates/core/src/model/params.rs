use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::config::{Mechanism, ModelConfig};
use crate::error::{Error, Result};
use crate::store::Side;
use crate::tensor::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Cell,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GatePart {
    Input,
    Hidden,
    Bias,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MlpPart {
    HiddenWeight,
    HiddenBias,
    OutWeight,
    OutBias,
}

/// Every learnable tensor of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Param {
    /// `W_0` on the entity's own previous embedding.
    ZeroState(Side),
    /// `W_0^f` on the entity's own features.
    ZeroFeature(Side),
    /// `w_0`, the elapsed-time encoding.
    TimeEncoding,
    /// `W_1` on the partner's previous embedding.
    FirstState(Side),
    /// `W_1^f` on the partner's features.
    FirstFeature(Side),
    MeanAggregator(Side),
    Recurrent { side: Side, gate: Gate, part: GatePart },
    /// `W_w`, shared by both sides.
    Attention,
    Fusion(Side, Mechanism),
    /// `w_t`, the projection's time-context vector.
    ProjectionTime,
    /// `W_2`
    ProjectionUser,
    /// `W_3`
    ProjectionUserFeature,
    /// `W_4`
    ProjectionItemFeature,
    Mlp(Side, MlpPart),
}

impl Param {
    /// Canonical order; a parameter's slot is its index here.
    pub fn all() -> Vec<Param> {
        let mut out = Vec::new();
        for side in [Side::User, Side::Item] {
            out.push(Param::ZeroState(side));
            out.push(Param::ZeroFeature(side));
        }
        out.push(Param::TimeEncoding);
        for side in [Side::User, Side::Item] {
            out.push(Param::FirstState(side));
            out.push(Param::FirstFeature(side));
        }
        for side in [Side::User, Side::Item] {
            out.push(Param::MeanAggregator(side));
        }
        for side in [Side::User, Side::Item] {
            for gate in Gate::ALL {
                for part in [GatePart::Input, GatePart::Hidden, GatePart::Bias] {
                    out.push(Param::Recurrent { side, gate, part });
                }
            }
        }
        out.push(Param::Attention);
        for side in [Side::User, Side::Item] {
            for m in Mechanism::ALL {
                out.push(Param::Fusion(side, m));
            }
        }
        out.push(Param::ProjectionTime);
        out.push(Param::ProjectionUser);
        out.push(Param::ProjectionUserFeature);
        out.push(Param::ProjectionItemFeature);
        for side in [Side::User, Side::Item] {
            for part in [MlpPart::HiddenWeight, MlpPart::HiddenBias, MlpPart::OutWeight, MlpPart::OutBias] {
                out.push(Param::Mlp(side, part));
            }
        }
        out
    }

    pub const COUNT: usize = 54;

    /// Index into [`Param::all`].
    pub fn slot(self) -> usize {
        let side = |s: Side| match s {
            Side::User => 0,
            Side::Item => 1,
        };
        match self {
            Param::ZeroState(s) => 2 * side(s),
            Param::ZeroFeature(s) => 2 * side(s) + 1,
            Param::TimeEncoding => 4,
            Param::FirstState(s) => 5 + 2 * side(s),
            Param::FirstFeature(s) => 6 + 2 * side(s),
            Param::MeanAggregator(s) => 9 + side(s),
            Param::Recurrent { side: s, gate, part } => {
                let g = match gate {
                    Gate::Input => 0,
                    Gate::Forget => 1,
                    Gate::Output => 2,
                    Gate::Cell => 3,
                };
                let p = match part {
                    GatePart::Input => 0,
                    GatePart::Hidden => 1,
                    GatePart::Bias => 2,
                };
                11 + 12 * side(s) + 3 * g + p
            }
            Param::Attention => 35,
            Param::Fusion(s, m) => {
                let m = match m {
                    Mechanism::Zero => 0,
                    Mechanism::First => 1,
                    Mechanism::Second => 2,
                };
                36 + 3 * side(s) + m
            }
            Param::ProjectionTime => 42,
            Param::ProjectionUser => 43,
            Param::ProjectionUserFeature => 44,
            Param::ProjectionItemFeature => 45,
            Param::Mlp(s, part) => {
                let p = match part {
                    MlpPart::HiddenWeight => 0,
                    MlpPart::HiddenBias => 1,
                    MlpPart::OutWeight => 2,
                    MlpPart::OutBias => 3,
                };
                46 + 4 * side(s) + p
            }
        }
    }

    pub fn shape(self, cfg: &ModelConfig) -> (usize, usize) {
        let d = cfg.dim;
        let feat = |side: Side| match side {
            Side::User => cfg.user_feature_dim(),
            Side::Item => cfg.item_feature_dim(),
        };
        match self {
            Param::ZeroState(_) | Param::FirstState(_) | Param::MeanAggregator(_) => (d, d),
            Param::ZeroFeature(side) => (d, feat(side)),
            Param::FirstFeature(side) => (d, feat(side.other())),
            Param::TimeEncoding | Param::ProjectionTime => (d, 1),
            Param::Recurrent { part: GatePart::Bias, .. } => (d, 1),
            Param::Recurrent { .. } => (d, d),
            Param::Attention => (1, 2 * d),
            Param::Fusion(..) | Param::ProjectionUser => (d, d),
            Param::ProjectionUserFeature => (d, cfg.user_feature_dim()),
            Param::ProjectionItemFeature => (d, cfg.item_feature_dim()),
            Param::Mlp(_, MlpPart::HiddenWeight | MlpPart::OutWeight) => (d, d),
            Param::Mlp(_, MlpPart::HiddenBias | MlpPart::OutBias) => (d, 1),
        }
    }

    fn is_bias(self) -> bool {
        matches!(
            self,
            Param::Recurrent { part: GatePart::Bias, .. }
                | Param::Mlp(_, MlpPart::HiddenBias | MlpPart::OutBias)
        )
    }

    pub fn name(self) -> String {
        let s = |side: Side| match side {
            Side::User => "u",
            Side::Item => "v",
        };
        match self {
            Param::ZeroState(side) => format!("zero.state.{}", s(side)),
            Param::ZeroFeature(side) => format!("zero.feature.{}", s(side)),
            Param::TimeEncoding => "zero.time".into(),
            Param::FirstState(side) => format!("first.state.{}", s(side)),
            Param::FirstFeature(side) => format!("first.feature.{}", s(side)),
            Param::MeanAggregator(side) => format!("second.mean.{}", s(side)),
            Param::Recurrent { side, gate, part } => {
                format!("second.recurrent.{}.{:?}.{:?}", s(side), gate, part).to_lowercase()
            }
            Param::Attention => "second.attention".into(),
            Param::Fusion(side, m) => format!("fusion.{}.{}", m.name(), s(side)),
            Param::ProjectionTime => "projection.time".into(),
            Param::ProjectionUser => "projection.user".into(),
            Param::ProjectionUserFeature => "projection.user_feature".into(),
            Param::ProjectionItemFeature => "projection.item_feature".into(),
            Param::Mlp(side, part) => format!("mlp.{}.{:?}", s(side), part).to_lowercase(),
        }
    }
}

/// All learnable tensors, indexed by [`Param::slot`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    tensors: Vec<DenseMatrix>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let tensors = Param::all()
            .into_iter()
            .map(|p| {
                let (rows, cols) = p.shape(cfg);
                if p.is_bias() {
                    return DenseMatrix::zeros(rows, cols);
                }
                let limit = libm::sqrt(6.0 / (rows + cols) as f64);
                let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
                DenseMatrix::from_vec(rows, cols, data).expect("sized above")
            })
            .collect();
        Ok(ModelParams { tensors })
    }

    /// All-zero tensors with the right shapes.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let tensors = Param::all()
            .into_iter()
            .map(|p| {
                let (r, c) = p.shape(cfg);
                DenseMatrix::zeros(r, c)
            })
            .collect();
        ModelParams { tensors }
    }

    /// Rebuilds parameters from tensors in slot order, checking shapes.
    pub fn from_tensors(cfg: &ModelConfig, tensors: Vec<DenseMatrix>) -> Result<Self> {
        let all = Param::all();
        if tensors.len() != all.len() {
            return Err(Error::Dimension { op: "params", left: (all.len(), 1), right: (tensors.len(), 1) });
        }
        for (p, t) in all.iter().zip(&tensors) {
            if p.shape(cfg) != t.shape() {
                return Err(Error::Dimension { op: "params", left: p.shape(cfg), right: t.shape() });
            }
        }
        Ok(ModelParams { tensors })
    }

    pub fn get(&self, p: Param) -> &DenseMatrix {
        &self.tensors[p.slot()]
    }

    pub fn get_mut(&mut self, p: Param) -> &mut DenseMatrix {
        &mut self.tensors[p.slot()]
    }

    pub fn set(&mut self, p: Param, value: DenseMatrix) {
        let slot = p.slot();
        assert_eq!(self.tensors[slot].shape(), value.shape(), "shape of {}", p.name());
        self.tensors[slot] = value;
    }

    pub fn tensors(&self) -> &[DenseMatrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        self.tensors.iter_mut().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(DenseMatrix::is_finite)
    }
}
