//! Forward kernels of the model, recorded on a [`Tape`].
//!
//! Each entity update combines three signals:
//!
//! ```text
//! zero   = theta(W0 h_prev + w0 * dt + W0f f_self)
//! first  = phi(W1 h_partner + W1f f_partner)
//! second = aggregate(h_prev, partner's recent neighbors)
//! h      = F(Wz zero + Wf first + Ws second)
//! ```
//!
//! and the user's new embedding is projected forward in time to predict the
//! item it pairs with:
//!
//! ```text
//! u+ = MLP_u(h_u * (1 + w_t * dt_future))
//! v+ = MLP_v(W2 u+ + W3 f_u + W4 f_v)
//! ```

use alloc::vec::Vec;

use super::config::{Aggregator, LossNorm, Mechanism, ModelConfig, PredictionTarget};
use super::params::{Gate, GatePart, MlpPart, ModelParams, Param};
use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::store::{GraphSnapshot, Interaction, Side};
use crate::tensor::{Activation, DenseMatrix};

/// Records kernels for one parameter set and configuration.
pub struct Forward<'a> {
    pub tape: &'a mut Tape,
    params: &'a ModelParams,
    cfg: &'a ModelConfig,
}

impl<'a> Forward<'a> {
    pub fn new(tape: &'a mut Tape, params: &'a ModelParams, cfg: &'a ModelConfig) -> Self {
        Forward { tape, params, cfg }
    }

    pub fn config(&self) -> &ModelConfig {
        self.cfg
    }

    fn p(&mut self, p: Param) -> NodeId {
        self.tape.param(p.slot(), self.params.get(p))
    }

    fn check_vector(&self, op: &'static str, id: NodeId, rows: usize) -> Result<()> {
        let shape = self.tape.value(id).shape();
        if shape != (rows, 1) {
            return Err(Error::Dimension { op, left: (rows, 1), right: shape });
        }
        Ok(())
    }

    /// `W x`, skipped (returns `None`) when `x` is empty.
    fn project(&mut self, w: Param, x: NodeId) -> Result<Option<NodeId>> {
        if self.tape.value(x).is_empty() {
            return Ok(None);
        }
        let w = self.p(w);
        self.tape.matmul(w, x).map(Some)
    }

    fn sum_terms(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        match terms {
            [single] => Ok(*single),
            [a, b] => self.tape.add(*a, *b),
            _ => self.tape.add_n(terms),
        }
    }

    /// Zero-order inheritance from the entity's own previous embedding,
    /// elapsed time `dt` (raw seconds) and own features.
    pub fn zero_order(&mut self, side: Side, prev: NodeId, dt: f64, features: NodeId) -> Result<NodeId> {
        if dt.is_nan() || dt < 0.0 {
            return Err(Error::Domain("elapsed time must be non-negative"));
        }
        let d = self.cfg.dim;
        self.check_vector("zero_order", prev, d)?;
        let own_dim = match side {
            Side::User => self.cfg.user_feature_dim(),
            Side::Item => self.cfg.item_feature_dim(),
        };
        self.check_vector("zero_order", features, own_dim)?;

        let w = self.p(Param::ZeroState(side));
        let mut terms = alloc::vec![self.tape.matmul(w, prev)?];
        let w0 = self.p(Param::TimeEncoding);
        terms.push(self.tape.scale(w0, self.cfg.normalize_time(dt)));
        if let Some(f) = self.project(Param::ZeroFeature(side), features)? {
            terms.push(f);
        }
        let pre = self.sum_terms(&terms)?;
        self.tape.act(pre, self.cfg.theta)
    }

    /// First-order propagation of the current partner's previous embedding
    /// and features.
    pub fn first_order(&mut self, side: Side, partner_prev: NodeId, partner_features: NodeId) -> Result<NodeId> {
        let d = self.cfg.dim;
        self.check_vector("first_order", partner_prev, d)?;
        let partner_dim = match side {
            Side::User => self.cfg.item_feature_dim(),
            Side::Item => self.cfg.user_feature_dim(),
        };
        self.check_vector("first_order", partner_features, partner_dim)?;

        let w = self.p(Param::FirstState(side));
        let mut terms = alloc::vec![self.tape.matmul(w, partner_prev)?];
        if let Some(f) = self.project(Param::FirstFeature(side), partner_features)? {
            terms.push(f);
        }
        let pre = self.sum_terms(&terms)?;
        self.tape.act(pre, self.cfg.phi)
    }

    /// Second-order aggregation of the partner's recent neighbors into the
    /// anchor. An empty neighbor list returns the anchor unchanged.
    pub fn second_order(&mut self, side: Side, anchor: NodeId, neighbors: &[NodeId]) -> Result<NodeId> {
        let d = self.cfg.dim;
        self.check_vector("second_order", anchor, d)?;
        for &n in neighbors {
            self.check_vector("second_order", n, d)?;
        }
        if neighbors.is_empty() {
            return Ok(anchor);
        }
        match self.cfg.aggregator {
            Aggregator::Mean => {
                let total = self.sum_terms(neighbors)?;
                let mean = self.tape.scale(total, 1.0 / neighbors.len() as f64);
                let w = self.p(Param::MeanAggregator(side));
                let agg = self.tape.matmul(w, mean)?;
                self.tape.add(anchor, agg)
            }
            Aggregator::Recurrent => {
                let hidden = self.recurrent(side, neighbors)?;
                self.tape.add(anchor, hidden)
            }
            Aggregator::Attention => {
                let (weights, stacked) = self.attention_weights(anchor, neighbors)?;
                self.tape.matmul(stacked, weights)
            }
        }
    }

    /// Attention weights over `neighbors` (an `n x 1` softmax) and the
    /// neighbors stacked as columns (`d x n`).
    pub fn attention_weights(&mut self, anchor: NodeId, neighbors: &[NodeId]) -> Result<(NodeId, NodeId)> {
        let w = self.p(Param::Attention);
        let mut scores = Vec::with_capacity(neighbors.len());
        for &n in neighbors {
            let pair = self.tape.concat_rows(&[anchor, n])?;
            scores.push(self.tape.matmul(w, pair)?);
        }
        let scores = self.tape.concat_rows(&scores)?;
        let scores = self.tape.act(scores, Activation::LeakyRelu(self.cfg.leaky_slope))?;
        let weights = self.tape.softmax(scores)?;
        let stacked = self.tape.concat_cols(neighbors)?;
        Ok((weights, stacked))
    }

    /// Final hidden state of an LSTM cell run over `inputs` in order,
    /// starting from zero hidden and cell states.
    fn recurrent(&mut self, side: Side, inputs: &[NodeId]) -> Result<NodeId> {
        let mut hidden: Option<NodeId> = None;
        let mut cell: Option<NodeId> = None;
        for &x in inputs {
            let gate = |this: &mut Self, g: Gate, act: Activation| -> Result<NodeId> {
                let wi = this.p(Param::Recurrent { side, gate: g, part: GatePart::Input });
                let b = this.p(Param::Recurrent { side, gate: g, part: GatePart::Bias });
                let mut terms = alloc::vec![this.tape.matmul(wi, x)?, b];
                if let Some(h) = hidden {
                    let wh = this.p(Param::Recurrent { side, gate: g, part: GatePart::Hidden });
                    terms.push(this.tape.matmul(wh, h)?);
                }
                let pre = this.sum_terms(&terms)?;
                this.tape.act(pre, act)
            };
            let i = gate(self, Gate::Input, Activation::Sigmoid)?;
            let f = gate(self, Gate::Forget, Activation::Sigmoid)?;
            let o = gate(self, Gate::Output, Activation::Sigmoid)?;
            let g = gate(self, Gate::Cell, Activation::Tanh)?;
            let ig = self.tape.mul(i, g)?;
            let c = match cell {
                Some(c) => {
                    let fc = self.tape.mul(f, c)?;
                    self.tape.add(fc, ig)?
                }
                None => ig,
            };
            let tc = self.tape.act(c, Activation::Tanh)?;
            hidden = Some(self.tape.mul(o, tc)?);
            cell = Some(c);
        }
        hidden.ok_or(Error::Domain("recurrent aggregator needs at least one input"))
    }

    /// Fusion of the three signals; disabled mechanisms are left out, which
    /// is the same as feeding them zero vectors.
    pub fn fuse(&mut self, side: Side, zero: NodeId, first: NodeId, second: NodeId) -> Result<NodeId> {
        let mut terms = Vec::with_capacity(3);
        for (m, x) in [(Mechanism::Zero, zero), (Mechanism::First, first), (Mechanism::Second, second)] {
            if !self.cfg.mechanisms.contains(m) {
                continue;
            }
            self.check_vector("fuse", x, self.cfg.dim)?;
            let w = self.p(Param::Fusion(side, m));
            terms.push(self.tape.matmul(w, x)?);
        }
        if terms.is_empty() {
            return Err(Error::Config("at least one update mechanism must be enabled"));
        }
        let pre = self.sum_terms(&terms)?;
        self.tape.act(pre, self.cfg.fusion)
    }

    /// One hidden layer of width `d` with LeakyReLU, linear output.
    pub fn mlp(&mut self, side: Side, x: NodeId) -> Result<NodeId> {
        let wh = self.p(Param::Mlp(side, MlpPart::HiddenWeight));
        let bh = self.p(Param::Mlp(side, MlpPart::HiddenBias));
        let wo = self.p(Param::Mlp(side, MlpPart::OutWeight));
        let bo = self.p(Param::Mlp(side, MlpPart::OutBias));
        let h = self.tape.matmul(wh, x)?;
        let h = self.tape.add(h, bh)?;
        let h = self.tape.act(h, Activation::LeakyRelu(self.cfg.leaky_slope))?;
        let out = self.tape.matmul(wo, h)?;
        self.tape.add(out, bo)
    }

    /// Projects the user's embedding `dt_future` seconds ahead.
    pub fn project_user(&mut self, user: NodeId, dt_future: f64) -> Result<NodeId> {
        if dt_future.is_nan() || dt_future < 0.0 {
            return Err(Error::Domain("projection interval must be non-negative"));
        }
        self.check_vector("project_user", user, self.cfg.dim)?;
        let wt = self.p(Param::ProjectionTime);
        let scaled = self.tape.scale(wt, self.cfg.normalize_time(dt_future));
        let ones = self.tape.constant(DenseMatrix::filled(self.cfg.dim, 1, 1.0));
        let modulation = self.tape.add(ones, scaled)?;
        let x = self.tape.mul(user, modulation)?;
        self.mlp(Side::User, x)
    }

    /// Predicted future item embedding from the projected user and both
    /// sides' features.
    pub fn project_item(&mut self, projected_user: NodeId, user_features: NodeId, item_features: NodeId) -> Result<NodeId> {
        self.check_vector("project_item", projected_user, self.cfg.dim)?;
        self.check_vector("project_item", user_features, self.cfg.user_feature_dim())?;
        self.check_vector("project_item", item_features, self.cfg.item_feature_dim())?;
        let w2 = self.p(Param::ProjectionUser);
        let mut terms = alloc::vec![self.tape.matmul(w2, projected_user)?];
        if let Some(t) = self.project(Param::ProjectionUserFeature, user_features)? {
            terms.push(t);
        }
        if let Some(t) = self.project(Param::ProjectionItemFeature, item_features)? {
            terms.push(t);
        }
        let pre = self.sum_terms(&terms)?;
        self.mlp(Side::Item, pre)
    }

    fn distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let diff = self.tape.sub(a, b)?;
        Ok(match self.cfg.loss_norm {
            LossNorm::Squared => self.tape.sum_squares(diff),
            LossNorm::Euclidean => self.tape.norm(diff),
        })
    }

    /// Prediction error plus user and item drift penalties.
    pub fn evolutionary_loss(
        &mut self,
        projected_item: NodeId,
        target: NodeId,
        user: NodeId,
        user_prev: NodeId,
        item: NodeId,
        item_prev: NodeId,
    ) -> Result<NodeId> {
        let pred = self.distance(projected_item, target)?;
        let mut terms = alloc::vec![pred];
        if self.cfg.lambda_u != 0.0 {
            let du = self.distance(user, user_prev)?;
            terms.push(self.tape.scale(du, self.cfg.lambda_u));
        }
        if self.cfg.alpha_v != 0.0 {
            let dv = self.distance(item, item_prev)?;
            terms.push(self.tape.scale(dv, self.cfg.alpha_v));
        }
        self.sum_terms(&terms)
    }

    /// New embeddings `(user, item)` for one interaction.
    pub fn update(&mut self, inputs: &StepInputs) -> Result<(NodeId, NodeId)> {
        let mech = self.cfg.mechanisms;
        let update = |this: &mut Self, side: Side| -> Result<NodeId> {
            let (prev, partner_prev, own_f, partner_f, neighbors, dt) = match side {
                Side::User => (
                    inputs.user_prev,
                    inputs.item_prev,
                    inputs.user_features,
                    inputs.item_features,
                    &inputs.user_neighbors,
                    inputs.user_dt,
                ),
                Side::Item => (
                    inputs.item_prev,
                    inputs.user_prev,
                    inputs.item_features,
                    inputs.user_features,
                    &inputs.item_neighbors,
                    inputs.item_dt,
                ),
            };
            // disabled mechanisms are never recorded; fuse ignores their slot
            let zero = if mech.zero { this.zero_order(side, prev, dt, own_f)? } else { prev };
            let first = if mech.first { this.first_order(side, partner_prev, partner_f)? } else { prev };
            let second = if mech.second { this.second_order(side, prev, neighbors)? } else { prev };
            this.fuse(side, zero, first, second)
        };
        let user = update(self, Side::User)?;
        let item = update(self, Side::Item)?;
        Ok((user, item))
    }

    /// Updates both sides of one interaction, projects, and scores the loss.
    pub fn step(&mut self, inputs: &StepInputs) -> Result<StepOutput> {
        let (user, item) = self.update(inputs)?;
        let (projected_user, projected_item, target) = match self.cfg.target {
            PredictionTarget::Current => {
                let pu = self.project_user(user, inputs.future_dt)?;
                let pi = self.project_item(pu, inputs.user_features, inputs.item_features)?;
                (pu, pi, item)
            }
            PredictionTarget::Upcoming => {
                let pu = self.project_user(inputs.user_prev, inputs.user_dt)?;
                let zeros = self.tape.constant(DenseMatrix::zeros(self.cfg.item_feature_dim(), 1));
                let pi = self.project_item(pu, inputs.user_features, zeros)?;
                (pu, pi, inputs.item_prev)
            }
        };
        let loss = self.evolutionary_loss(projected_item, target, user, inputs.user_prev, item, inputs.item_prev)?;
        Ok(StepOutput { user, item, projected_user, projected_item, loss })
    }

    /// Predicted embedding of the item `user_state` will pick `dt` seconds
    /// after its last interaction. Item-side features are unknown at query
    /// time and enter as zeros.
    pub fn predict(&mut self, user_embedding: &[f64], dt: f64, user_features: &[f64]) -> Result<NodeId> {
        let h = self.tape.constant(DenseMatrix::column(user_embedding));
        let fu = self.tape.constant(DenseMatrix::column(user_features));
        let fv = self.tape.constant(DenseMatrix::zeros(self.cfg.item_feature_dim(), 1));
        let pu = self.project_user(h, dt)?;
        self.project_item(pu, fu, fv)
    }
}

/// Tape handles feeding one [`Forward::step`].
#[derive(Clone, Debug)]
pub struct StepInputs {
    pub user_prev: NodeId,
    pub item_prev: NodeId,
    pub user_features: NodeId,
    pub item_features: NodeId,
    /// Recent users of the item, aggregated into the user.
    pub user_neighbors: Vec<NodeId>,
    /// Recent items of the user, aggregated into the item.
    pub item_neighbors: Vec<NodeId>,
    pub user_dt: f64,
    pub item_dt: f64,
    pub future_dt: f64,
}

impl StepInputs {
    /// Reads everything an interaction needs from `snap` and records it as
    /// constants.
    pub fn gather(
        tape: &mut Tape,
        snap: &GraphSnapshot,
        cfg: &ModelConfig,
        x: &Interaction,
        future_dt: f64,
    ) -> Result<Self> {
        snap.check_interaction(x)?;
        let user = snap.state(Side::User, x.user)?;
        let item = snap.state(Side::Item, x.item)?;
        let (fu, fv) = cfg.feature_inputs(x.user, x.item, &x.features);
        let take = |cap: usize, mut v: Vec<_>| {
            if v.len() > cap {
                v.drain(..v.len() - cap);
            }
            v
        };
        let exclude = |id| if cfg.exclude_partner { Some(id) } else { None };
        let user_hist = take(
            cfg.aggregation_size,
            snap.neighbors_for(Side::Item, x.item, exclude(x.user), cfg.history_policy)?,
        );
        let item_hist = take(
            cfg.aggregation_size,
            snap.neighbors_for(Side::User, x.user, exclude(x.item), cfg.history_policy)?,
        );
        Ok(StepInputs {
            user_prev: tape.constant(DenseMatrix::column(&user.embedding)),
            item_prev: tape.constant(DenseMatrix::column(&item.embedding)),
            user_features: tape.constant(DenseMatrix::column(&fu)),
            item_features: tape.constant(DenseMatrix::column(&fv)),
            user_neighbors: user_hist.iter().map(|e| tape.constant(DenseMatrix::column(&e.embedding))).collect(),
            item_neighbors: item_hist.iter().map(|e| tape.constant(DenseMatrix::column(&e.embedding))).collect(),
            user_dt: user.elapsed(x.time),
            item_dt: item.elapsed(x.time),
            future_dt,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutput {
    pub user: NodeId,
    pub item: NodeId,
    pub projected_user: NodeId,
    pub projected_item: NodeId,
    pub loss: NodeId,
}
