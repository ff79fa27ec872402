//! Straight-line re-implementation of one model step on plain vectors.

use dgcf_core::model::{Aggregator, Gate, GatePart, LossNorm, Mechanism, MlpPart, ModelConfig, ModelParams, Param};
use dgcf_core::store::Side;
use dgcf_core::tensor::{Activation, DenseMatrix};

type V = Vec<f64>;

fn matvec(w: &DenseMatrix, x: &[f64]) -> V {
    assert_eq!(w.cols(), x.len());
    (0..w.rows()).map(|r| (0..w.cols()).map(|c| w.get(r, c) * x[c]).sum()).collect()
}

fn plus(a: &[f64], b: &[f64]) -> V {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn times(a: &[f64], b: &[f64]) -> V {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn act(a: Activation, x: &[f64]) -> V {
    x.iter()
        .map(|&v| match a {
            Activation::Identity => v,
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            Activation::Tanh => v.tanh(),
            Activation::LeakyRelu(s) => {
                if v > 0.0 {
                    v
                } else {
                    s * v
                }
            }
        })
        .collect()
}

fn col(m: &DenseMatrix) -> V {
    m.as_slice().to_vec()
}

pub struct Inputs {
    pub user_prev: V,
    pub item_prev: V,
    pub user_features: V,
    pub item_features: V,
    pub user_neighbors: Vec<V>,
    pub item_neighbors: Vec<V>,
    pub user_dt: f64,
    pub item_dt: f64,
    pub future_dt: f64,
}

pub struct Outputs {
    pub user: V,
    pub item: V,
    pub projected_user: V,
    pub projected_item: V,
    pub loss: f64,
}

pub struct Reference<'a> {
    pub cfg: &'a ModelConfig,
    pub params: &'a ModelParams,
}

impl Reference<'_> {
    fn w(&self, p: Param) -> &DenseMatrix {
        self.params.get(p)
    }

    fn scale(&self) -> f64 {
        self.cfg.time_scale.unwrap_or(1.0)
    }

    pub fn zero(&self, side: Side, prev: &[f64], dt: f64, own: &[f64]) -> V {
        let mut pre = matvec(self.w(Param::ZeroState(side)), prev);
        let w0 = col(self.w(Param::TimeEncoding));
        pre = plus(&pre, &w0.iter().map(|x| x * dt / self.scale()).collect::<V>());
        if !own.is_empty() {
            pre = plus(&pre, &matvec(self.w(Param::ZeroFeature(side)), own));
        }
        act(self.cfg.theta, &pre)
    }

    pub fn first(&self, side: Side, partner: &[f64], partner_features: &[f64]) -> V {
        let mut pre = matvec(self.w(Param::FirstState(side)), partner);
        if !partner_features.is_empty() {
            pre = plus(&pre, &matvec(self.w(Param::FirstFeature(side)), partner_features));
        }
        act(self.cfg.phi, &pre)
    }

    pub fn attention(&self, anchor: &[f64], neighbors: &[V]) -> V {
        let ww = self.w(Param::Attention);
        let scores: V = neighbors
            .iter()
            .map(|n| {
                let pair: V = anchor.iter().chain(n).copied().collect();
                let s = matvec(ww, &pair)[0];
                if s > 0.0 {
                    s
                } else {
                    self.cfg.leaky_slope * s
                }
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: V = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.iter().map(|e| e / z).collect()
    }

    fn lstm(&self, side: Side, inputs: &[V]) -> V {
        let d = self.cfg.dim;
        let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
        for x in inputs {
            let gate = |g: Gate, a: Activation| {
                let pre = plus(
                    &plus(
                        &matvec(self.w(Param::Recurrent { side, gate: g, part: GatePart::Input }), x),
                        &matvec(self.w(Param::Recurrent { side, gate: g, part: GatePart::Hidden }), &h),
                    ),
                    &col(self.w(Param::Recurrent { side, gate: g, part: GatePart::Bias })),
                );
                act(a, &pre)
            };
            let i = gate(Gate::Input, Activation::Sigmoid);
            let f = gate(Gate::Forget, Activation::Sigmoid);
            let o = gate(Gate::Output, Activation::Sigmoid);
            let g = gate(Gate::Cell, Activation::Tanh);
            c = plus(&times(&f, &c), &times(&i, &g));
            h = times(&o, &act(Activation::Tanh, &c));
        }
        h
    }

    pub fn second(&self, side: Side, anchor: &[f64], neighbors: &[V]) -> V {
        if neighbors.is_empty() {
            return anchor.to_vec();
        }
        match self.cfg.aggregator {
            Aggregator::Mean => {
                let mut mean = vec![0.0; anchor.len()];
                for n in neighbors {
                    mean = plus(&mean, n);
                }
                let mean: V = mean.iter().map(|x| x / neighbors.len() as f64).collect();
                plus(anchor, &matvec(self.w(Param::MeanAggregator(side)), &mean))
            }
            Aggregator::Recurrent => plus(anchor, &self.lstm(side, neighbors)),
            Aggregator::Attention => {
                let alpha = self.attention(anchor, neighbors);
                let mut out = vec![0.0; anchor.len()];
                for (a, n) in alpha.iter().zip(neighbors) {
                    out = plus(&out, &n.iter().map(|x| a * x).collect::<V>());
                }
                out
            }
        }
    }

    pub fn fuse(&self, side: Side, zero: &[f64], first: &[f64], second: &[f64]) -> V {
        let mut pre = vec![0.0; self.cfg.dim];
        for (m, x) in [(Mechanism::Zero, zero), (Mechanism::First, first), (Mechanism::Second, second)] {
            if self.cfg.mechanisms.contains(m) {
                pre = plus(&pre, &matvec(self.w(Param::Fusion(side, m)), x));
            }
        }
        act(self.cfg.fusion, &pre)
    }

    pub fn mlp(&self, side: Side, x: &[f64]) -> V {
        let h = plus(&matvec(self.w(Param::Mlp(side, MlpPart::HiddenWeight)), x), &col(self.w(Param::Mlp(side, MlpPart::HiddenBias))));
        let h = act(Activation::LeakyRelu(self.cfg.leaky_slope), &h);
        plus(&matvec(self.w(Param::Mlp(side, MlpPart::OutWeight)), &h), &col(self.w(Param::Mlp(side, MlpPart::OutBias))))
    }

    pub fn project_user(&self, h: &[f64], dt: f64) -> V {
        let wt = col(self.w(Param::ProjectionTime));
        let m: V = wt.iter().map(|w| 1.0 + w * dt / self.scale()).collect();
        self.mlp(Side::User, &times(h, &m))
    }

    pub fn project_item(&self, pu: &[f64], fu: &[f64], fv: &[f64]) -> V {
        let mut pre = matvec(self.w(Param::ProjectionUser), pu);
        if !fu.is_empty() {
            pre = plus(&pre, &matvec(self.w(Param::ProjectionUserFeature), fu));
        }
        if !fv.is_empty() {
            pre = plus(&pre, &matvec(self.w(Param::ProjectionItemFeature), fv));
        }
        self.mlp(Side::Item, &pre)
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        match self.cfg.loss_norm {
            LossNorm::Squared => sq,
            LossNorm::Euclidean => sq.sqrt(),
        }
    }

    pub fn loss(&self, projected_item: &[f64], target: &[f64], user: &[f64], user_prev: &[f64], item: &[f64], item_prev: &[f64]) -> f64 {
        self.distance(projected_item, target)
            + self.cfg.lambda_u * self.distance(user, user_prev)
            + self.cfg.alpha_v * self.distance(item, item_prev)
    }

    /// One update of both sides followed by the training projection for
    /// the `Current` target.
    pub fn step(&self, x: &Inputs) -> Outputs {
        let m = self.cfg.mechanisms;
        let side_update = |side: Side| {
            let (prev, partner, own_f, partner_f, nbrs, dt) = match side {
                Side::User => (&x.user_prev, &x.item_prev, &x.user_features, &x.item_features, &x.user_neighbors, x.user_dt),
                Side::Item => (&x.item_prev, &x.user_prev, &x.item_features, &x.user_features, &x.item_neighbors, x.item_dt),
            };
            let zero = if m.zero { self.zero(side, prev, dt, own_f) } else { prev.clone() };
            let first = if m.first { self.first(side, partner, partner_f) } else { prev.clone() };
            let second = if m.second { self.second(side, prev, nbrs) } else { prev.clone() };
            self.fuse(side, &zero, &first, &second)
        };
        let user = side_update(Side::User);
        let item = side_update(Side::Item);
        let projected_user = self.project_user(&user, x.future_dt);
        let projected_item = self.project_item(&projected_user, &x.user_features, &x.item_features);
        let loss = self.loss(&projected_item, &item, &user, &x.user_prev, &item, &x.item_prev);
        Outputs { user, item, projected_user, projected_item, loss }
    }
}
