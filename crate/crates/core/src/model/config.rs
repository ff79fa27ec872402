use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::store::HistoryPolicy;
use crate::tensor::{Activation, DEFAULT_LEAKY_SLOPE};

/// Second-order aggregator kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregator {
    Mean,
    /// Gated recurrent (LSTM) cell run over the neighbors in time order.
    Recurrent,
    Attention,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Mean, Aggregator::Recurrent, Aggregator::Attention];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::Recurrent => "recurrent",
            Aggregator::Attention => "attention",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Aggregator::Mean),
            "recurrent" | "lstm" => Some(Aggregator::Recurrent),
            "attention" | "gat" => Some(Aggregator::Attention),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Zero,
    First,
    Second,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Zero, Mechanism::First, Mechanism::Second];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Zero => "zero",
            Mechanism::First => "first",
            Mechanism::Second => "second",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(Mechanism::Zero),
            "first" => Some(Mechanism::First),
            "second" => Some(Mechanism::Second),
            _ => None,
        }
    }
}

/// Enabled update mechanisms. Disabling one reproduces the DGCF-0/1/2
/// ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mechanisms {
    pub zero: bool,
    pub first: bool,
    pub second: bool,
}

impl Mechanisms {
    pub const ALL: Mechanisms = Mechanisms { zero: true, first: true, second: true };

    pub fn without(self, m: Mechanism) -> Self {
        let mut out = self;
        match m {
            Mechanism::Zero => out.zero = false,
            Mechanism::First => out.first = false,
            Mechanism::Second => out.second = false,
        }
        out
    }

    pub fn contains(self, m: Mechanism) -> bool {
        match m {
            Mechanism::Zero => self.zero,
            Mechanism::First => self.first,
            Mechanism::Second => self.second,
        }
    }

    pub fn enabled(self) -> impl Iterator<Item = Mechanism> {
        Mechanism::ALL.into_iter().filter(move |m| self.contains(*m))
    }

    pub fn is_empty(self) -> bool {
        !(self.zero || self.first || self.second)
    }
}

/// What the projected item embedding is scored against during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PredictionTarget {
    /// The user's new embedding, projected to its next interaction time, is
    /// compared with the current item's new embedding.
    #[default]
    Current,
    /// The user's previous embedding, projected by the time elapsed since
    /// then, is compared with the item's embedding before the interaction.
    /// Item features enter the projection as zeros, as at query time.
    Upcoming,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossNorm {
    /// Squared Euclidean distance.
    #[default]
    Squared,
    Euclidean,
}

/// How an interaction's raw feature vector maps onto the user-side and
/// item-side feature inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureLayout {
    /// Both sides see the whole vector.
    Shared,
    /// The first `n` values describe the user, the rest the item.
    Split(usize),
    /// Features are dropped.
    Ignore,
    /// One-hot entity ids; raw features are dropped.
    OneHot { users: usize, items: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    /// Length of the raw per-interaction feature vector.
    pub feature_dim: usize,
    pub features: FeatureLayout,
    pub aggregator: Aggregator,
    pub mechanisms: Mechanisms,
    /// Zero-order activation.
    pub theta: Activation,
    /// First-order activation.
    pub phi: Activation,
    pub fusion: Activation,
    /// Aggregation size `T`.
    pub aggregation_size: usize,
    pub lambda_u: f64,
    pub alpha_v: f64,
    /// Divisor applied to every elapsed time. `None` until resolved from the
    /// training split.
    pub time_scale: Option<f64>,
    pub loss_norm: LossNorm,
    pub leaky_slope: f64,
    pub history_policy: HistoryPolicy,
    /// Drop the current partner from the partner's own history before
    /// aggregating.
    pub exclude_partner: bool,
    pub target: PredictionTarget,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 128,
            feature_dim: 0,
            features: FeatureLayout::Shared,
            aggregator: Aggregator::Attention,
            mechanisms: Mechanisms::ALL,
            theta: Activation::Identity,
            phi: Activation::Identity,
            fusion: Activation::Sigmoid,
            aggregation_size: 20,
            lambda_u: 1.0,
            alpha_v: 1.0,
            time_scale: None,
            loss_norm: LossNorm::Squared,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            history_policy: HistoryPolicy::Snapshot,
            exclude_partner: false,
            target: PredictionTarget::Current,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1"));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::Config("at least one update mechanism must be enabled"));
        }
        if !(self.lambda_u >= 0.0 && self.alpha_v >= 0.0) {
            return Err(Error::Config("lambda_u and alpha_v must be non-negative"));
        }
        if let Some(s) = self.time_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config("time_scale must be positive"));
            }
        }
        if let FeatureLayout::Split(n) = self.features {
            if n > self.feature_dim {
                return Err(Error::Config("feature split exceeds the feature dimension"));
            }
        }
        Ok(())
    }

    pub fn user_feature_dim(&self) -> usize {
        match self.features {
            FeatureLayout::Shared => self.feature_dim,
            FeatureLayout::Split(n) => n,
            FeatureLayout::Ignore => 0,
            FeatureLayout::OneHot { users, .. } => users,
        }
    }

    pub fn item_feature_dim(&self) -> usize {
        match self.features {
            FeatureLayout::Shared => self.feature_dim,
            FeatureLayout::Split(n) => self.feature_dim - n,
            FeatureLayout::Ignore => 0,
            FeatureLayout::OneHot { items, .. } => items,
        }
    }

    /// Splits an interaction's features into the user and item inputs.
    pub fn feature_inputs(&self, user: usize, item: usize, raw: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let fu = self.user_feature_dim();
        let fv = self.item_feature_dim();
        let pad = |src: &[f64], n: usize| -> Vec<f64> {
            let mut v = Vec::with_capacity(n);
            v.extend(src.iter().take(n));
            v.resize(n, 0.0);
            v
        };
        match self.features {
            FeatureLayout::Shared => (pad(raw, fu), pad(raw, fv)),
            FeatureLayout::Split(n) => {
                let (a, b) = raw.split_at(n.min(raw.len()));
                (pad(a, fu), pad(b, fv))
            }
            FeatureLayout::Ignore => (Vec::new(), Vec::new()),
            FeatureLayout::OneHot { users, items } => {
                let mut a = alloc::vec![0.0; users];
                let mut b = alloc::vec![0.0; items];
                if user < users {
                    a[user] = 1.0;
                }
                if item < items {
                    b[item] = 1.0;
                }
                (a, b)
            }
        }
    }

    pub fn normalize_time(&self, dt: f64) -> f64 {
        dt / self.time_scale.unwrap_or(1.0)
    }
}
