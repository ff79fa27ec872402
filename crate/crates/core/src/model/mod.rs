//! Embedding update kernels, projections, loss and ranking.

mod config;
mod kernels;
mod params;
mod rank;

pub use config::{Aggregator, FeatureLayout, LossNorm, Mechanism, Mechanisms, ModelConfig, PredictionTarget};
pub use kernels::{Forward, StepInputs, StepOutput};
pub use params::{Gate, GatePart, MlpPart, ModelParams, Param};
pub use rank::{rank_items, rank_of, top_k};

use crate::autodiff::Tape;
use crate::error::Result;
use crate::store::{GraphSnapshot, Interaction};

/// Gathers `x`'s inputs from `snap` and records one full update on `tape`.
/// `future_dt` is the time until the user's next interaction.
pub fn forward_step(
    snap: &GraphSnapshot,
    x: &Interaction,
    future_dt: f64,
    params: &ModelParams,
    cfg: &ModelConfig,
    tape: &mut Tape,
) -> Result<(StepInputs, StepOutput)> {
    let inputs = StepInputs::gather(tape, snap, cfg, x, future_dt)?;
    let out = Forward::new(tape, params, cfg).step(&inputs)?;
    Ok((inputs, out))
}
