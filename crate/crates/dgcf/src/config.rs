//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Every key is optional.
//!
//! | key | default |
//! |---|---|
//! | `dim` | 128 |
//! | `aggregator` | `attention` (`mean`, `recurrent`) |
//! | `mechanisms` | `zero,first,second` |
//! | `aggregation_size` | 20 |
//! | `lambda_u`, `alpha_v` | 1 |
//! | `theta`, `phi` | `identity` |
//! | `fusion` | `sigmoid` (`identity`, `tanh`, `leaky_relu`) |
//! | `leaky_slope` | 0.01 |
//! | `loss_norm` | `squared` (`euclidean`) |
//! | `time_scale` | `auto` (mean inter-event interval of the training split) |
//! | `features` | `shared` (`ignore`, `onehot`, `split:N`) |
//! | `history` | `snapshot` (`live`) |
//! | `exclude_partner` | false |
//! | `target` | `current` (`upcoming`) |
//! | `epochs` | 50 |
//! | `learning_rate` | 0.001 |
//! | `l2_penalty` | 0.001 |
//! | `bptt_window` | 1 |
//! | `max_segment` | 500 |
//! | `select` | `mrr` (`recall10`) |
//! | `state_carry` | `carry` (`reset`) |
//! | `seed` | 0 |

use std::path::Path;
use std::str::FromStr;

use dgcf_core::data::DatasetMeta;
use dgcf_core::model::{Aggregator, FeatureLayout, LossNorm, Mechanism, Mechanisms, ModelConfig, PredictionTarget};
use dgcf_core::store::HistoryPolicy;
use dgcf_core::tensor::Activation;
use dgcf_core::trainer::{SelectMetric, StateCarry, TrainConfig};

use crate::error::{Error, Result};

/// How interaction features feed the model; resolved against a dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureMode {
    #[default]
    Shared,
    Ignore,
    OneHot,
    Split(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub features: FeatureMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { model: ModelConfig::default(), train: TrainConfig::default(), features: FeatureMode::Shared }
    }
}

impl RunConfig {
    /// The model configuration for a concrete dataset.
    pub fn resolve(&self, meta: &DatasetMeta) -> Result<ModelConfig> {
        let mut model = self.model.clone();
        model.feature_dim = meta.feature_dim;
        model.features = match self.features {
            FeatureMode::Shared => FeatureLayout::Shared,
            FeatureMode::Ignore => FeatureLayout::Ignore,
            FeatureMode::OneHot => FeatureLayout::OneHot { users: meta.num_users, items: meta.num_items },
            FeatureMode::Split(n) if n <= meta.feature_dim => FeatureLayout::Split(n),
            FeatureMode::Split(n) => {
                return Err(Error::config("features", format!("split {n} exceeds the {} feature columns", meta.feature_dim)))
            }
        };
        model.validate().map_err(|e| Error::config("model", e.to_string()))?;
        Ok(model)
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    parse_config_str(&text)
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::config(key, format!("`{value}` is not a valid {}", std::any::type_name::<T>())))
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T> {
    options.iter().find(|(name, _)| *name == value).map(|&(_, v)| v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Error::config(key, format!("`{value}` is not one of {}", names.join(", ")))
    })
}

fn activation(key: &str, value: &str, slope: f64) -> Result<Activation> {
    choice(
        key,
        value,
        &[
            ("identity", Activation::Identity),
            ("sigmoid", Activation::Sigmoid),
            ("tanh", Activation::Tanh),
            ("leaky_relu", Activation::LeakyRelu(slope)),
        ],
    )
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    choice(key, value, &[("true", true), ("false", false), ("yes", true), ("no", false), ("1", true), ("0", false)])
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut activations: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(line, format!("line {} is not `key = value`", n + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        let m = &mut cfg.model;
        let t = &mut cfg.train;
        match key {
            "dim" => m.dim = number(key, value)?,
            "aggregator" => m.aggregator = Aggregator::parse(value).ok_or_else(|| Error::config(key, format!("unknown aggregator `{value}`")))?,
            "mechanisms" => {
                let mut set = Mechanisms { zero: false, first: false, second: false };
                for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match Mechanism::parse(name) {
                        Some(Mechanism::Zero) => set.zero = true,
                        Some(Mechanism::First) => set.first = true,
                        Some(Mechanism::Second) => set.second = true,
                        None => return Err(Error::config(key, format!("unknown mechanism `{name}`"))),
                    }
                }
                if set.is_empty() {
                    return Err(Error::config(key, "at least one mechanism is required"));
                }
                m.mechanisms = set;
            }
            "aggregation_size" => m.aggregation_size = number(key, value)?,
            "lambda_u" => m.lambda_u = number(key, value)?,
            "alpha_v" => m.alpha_v = number(key, value)?,
            "theta" | "phi" | "fusion" => activations.push((key.to_owned(), value.to_owned())),
            "leaky_slope" => m.leaky_slope = number(key, value)?,
            "loss_norm" => m.loss_norm = choice(key, value, &[("squared", LossNorm::Squared), ("euclidean", LossNorm::Euclidean)])?,
            "time_scale" => {
                m.time_scale = if value == "auto" { None } else { Some(number(key, value)?) };
            }
            "features" => {
                cfg.features = match value.strip_prefix("split:") {
                    Some(n) => FeatureMode::Split(number(key, n)?),
                    None => choice(key, value, &[("shared", FeatureMode::Shared), ("ignore", FeatureMode::Ignore), ("onehot", FeatureMode::OneHot)])?,
                }
            }
            "history" => m.history_policy = choice(key, value, &[("snapshot", HistoryPolicy::Snapshot), ("live", HistoryPolicy::Live)])?,
            "exclude_partner" => m.exclude_partner = parse_bool(key, value)?,
            "target" => m.target = choice(key, value, &[("current", PredictionTarget::Current), ("upcoming", PredictionTarget::Upcoming)])?,
            "epochs" => t.epochs = number(key, value)?,
            "learning_rate" => t.learning_rate = number(key, value)?,
            "l2_penalty" => t.l2_penalty = number(key, value)?,
            "bptt_window" => t.bptt_window = number(key, value)?,
            "max_segment" => t.max_segment = number(key, value)?,
            "select" => t.select = choice(key, value, &[("mrr", SelectMetric::Mrr), ("recall10", SelectMetric::Recall10)])?,
            "state_carry" => t.state_carry = choice(key, value, &[("carry", StateCarry::Carry), ("reset", StateCarry::Reset)])?,
            "seed" => t.seed = number(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
    }
    // activations last so that leaky_slope applies wherever it appears
    for (key, value) in activations {
        let a = activation(&key, &value, cfg.model.leaky_slope)?;
        match key.as_str() {
            "theta" => cfg.model.theta = a,
            "phi" => cfg.model.phi = a,
            _ => cfg.model.fusion = a,
        }
    }
    cfg.train.validate().map_err(|e| Error::config("train", e.to_string()))?;
    if cfg.model.lambda_u.is_nan() || cfg.model.lambda_u < 0.0 {
        return Err(Error::config("lambda_u", "must be non-negative"));
    }
    if cfg.model.alpha_v.is_nan() || cfg.model.alpha_v < 0.0 {
        return Err(Error::config("alpha_v", "must be non-negative"));
    }
    if cfg.model.dim == 0 {
        return Err(Error::config("dim", "must be at least 1"));
    }
    Ok(cfg)
}
