//! Binary checkpoint container.
//!
//! ```text
//! "DGCF" | version: u16 | config | params | optimizer | states | crc64: u64
//! ```
//!
//! Each section is a `u64` byte length followed by its payload. Numbers are
//! little-endian; floats are stored as their IEEE bits, so a round trip is
//! exact. The trailing CRC-64/XZ covers every preceding byte.

use std::path::Path;

use dgcf_core::adam::{AdamConfig, AdamState};
use dgcf_core::model::{Aggregator, FeatureLayout, LossNorm, Mechanisms, ModelConfig, ModelParams, PredictionTarget};
use dgcf_core::store::{EntityState, GraphSnapshot, HistoryEntry, HistoryPolicy, NeighborHistory};
use dgcf_core::tensor::{Activation, DenseMatrix};
use dgcf_core::trainer::{Checkpoint, SelectMetric, StateCarry, TrainConfig};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DGCF";
pub const VERSION: u16 = 1;

const CRC: crc::Crc<u64> = crc::Crc::<u64>::new(&crc::CRC_64_XZ);

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn floats(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn matrix(&mut self, m: &DenseMatrix) {
        self.usize(m.rows());
        self.usize(m.cols());
        m.as_slice().iter().for_each(|&x| self.f64(x));
    }
    fn matrices(&mut self, ms: &[DenseMatrix]) {
        self.usize(ms.len());
        ms.iter().for_each(|m| self.matrix(m));
    }
    fn section(&mut self, body: Writer) {
        self.usize(body.0.len());
        self.0.extend(body.0);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    what: &'static str,
}

fn corrupt(what: &str, detail: impl std::fmt::Display) -> Error {
    Error::Integrity(format!("{what} section: {detail}"))
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.bytes.len() {
            return Err(corrupt(self.what, "truncated"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| corrupt(self.what, "length out of range"))
    }
    /// A length that must be coverable by the remaining bytes at
    /// `unit` bytes per element.
    fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.checked_mul(unit).is_none_or(|b| b > self.bytes.len()) {
            return Err(corrupt(self.what, "truncated"));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(corrupt(self.what, format!("bad flag {v}"))),
        }
    }
    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn matrix(&mut self) -> Result<DenseMatrix> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let n = rows.checked_mul(cols).filter(|n| n.saturating_mul(8) <= self.bytes.len());
        let n = n.ok_or_else(|| corrupt(self.what, "truncated"))?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(DenseMatrix::from_vec(rows, cols, data)?)
    }
    fn matrices(&mut self) -> Result<Vec<DenseMatrix>> {
        let n = self.len(16)?;
        (0..n).map(|_| self.matrix()).collect()
    }
    fn tag<T>(&mut self, options: &[T]) -> Result<T>
    where
        T: Copy,
    {
        let t = self.u8()? as usize;
        options.get(t).copied().ok_or_else(|| corrupt(self.what, format!("unknown tag {t}")))
    }
    fn section(&mut self, what: &'static str) -> Result<Reader<'a>> {
        self.what = what;
        let n = self.len(1)?;
        Ok(Reader { bytes: self.take(n)?, what })
    }
    fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(corrupt(self.what, "trailing bytes"))
        }
    }
}

fn put_activation(w: &mut Writer, a: Activation) {
    match a {
        Activation::Identity => w.u8(0),
        Activation::Sigmoid => w.u8(1),
        Activation::Tanh => w.u8(2),
        Activation::LeakyRelu(s) => {
            w.u8(3);
            w.f64(s);
        }
    }
}

fn get_activation(r: &mut Reader<'_>) -> Result<Activation> {
    Ok(match r.u8()? {
        0 => Activation::Identity,
        1 => Activation::Sigmoid,
        2 => Activation::Tanh,
        3 => Activation::LeakyRelu(r.f64()?),
        t => return Err(corrupt(r.what, format!("unknown activation {t}"))),
    })
}

const AGGREGATORS: [Aggregator; 3] = Aggregator::ALL;
const NORMS: [LossNorm; 2] = [LossNorm::Squared, LossNorm::Euclidean];
const POLICIES: [HistoryPolicy; 2] = [HistoryPolicy::Snapshot, HistoryPolicy::Live];
const TARGETS: [PredictionTarget; 2] = [PredictionTarget::Current, PredictionTarget::Upcoming];
const SELECTS: [SelectMetric; 2] = [SelectMetric::Mrr, SelectMetric::Recall10];
const CARRIES: [StateCarry; 2] = [StateCarry::Carry, StateCarry::Reset];

fn index_of<T: PartialEq>(options: &[T], v: &T) -> u8 {
    options.iter().position(|o| o == v).expect("every variant is listed") as u8
}

fn put_configs(w: &mut Writer, m: &ModelConfig, t: &TrainConfig) {
    w.usize(m.dim);
    w.usize(m.feature_dim);
    match m.features {
        FeatureLayout::Shared => w.u8(0),
        FeatureLayout::Split(n) => {
            w.u8(1);
            w.usize(n);
        }
        FeatureLayout::Ignore => w.u8(2),
        FeatureLayout::OneHot { users, items } => {
            w.u8(3);
            w.usize(users);
            w.usize(items);
        }
    }
    w.u8(index_of(&AGGREGATORS, &m.aggregator));
    w.u8(m.mechanisms.zero as u8 | (m.mechanisms.first as u8) << 1 | (m.mechanisms.second as u8) << 2);
    for a in [m.theta, m.phi, m.fusion] {
        put_activation(w, a);
    }
    w.usize(m.aggregation_size);
    w.f64(m.lambda_u);
    w.f64(m.alpha_v);
    match m.time_scale {
        Some(s) => {
            w.u8(1);
            w.f64(s);
        }
        None => w.u8(0),
    }
    w.u8(index_of(&NORMS, &m.loss_norm));
    w.f64(m.leaky_slope);
    w.u8(index_of(&POLICIES, &m.history_policy));
    w.u8(m.exclude_partner as u8);
    w.u8(index_of(&TARGETS, &m.target));

    w.usize(t.epochs);
    w.f64(t.learning_rate);
    w.f64(t.l2_penalty);
    w.usize(t.bptt_window);
    w.usize(t.max_segment);
    w.u64(t.seed);
    w.u8(index_of(&SELECTS, &t.select));
    w.u8(index_of(&CARRIES, &t.state_carry));
}

fn get_configs(r: &mut Reader<'_>) -> Result<(ModelConfig, TrainConfig)> {
    let dim = r.usize()?;
    let feature_dim = r.usize()?;
    let features = match r.u8()? {
        0 => FeatureLayout::Shared,
        1 => FeatureLayout::Split(r.usize()?),
        2 => FeatureLayout::Ignore,
        3 => FeatureLayout::OneHot { users: r.usize()?, items: r.usize()? },
        t => return Err(corrupt(r.what, format!("unknown feature layout {t}"))),
    };
    let aggregator = r.tag(&AGGREGATORS)?;
    let bits = r.u8()?;
    if bits > 7 {
        return Err(corrupt(r.what, "bad mechanism set"));
    }
    let mechanisms = Mechanisms { zero: bits & 1 != 0, first: bits & 2 != 0, second: bits & 4 != 0 };
    let theta = get_activation(r)?;
    let phi = get_activation(r)?;
    let fusion = get_activation(r)?;
    let aggregation_size = r.usize()?;
    let lambda_u = r.f64()?;
    let alpha_v = r.f64()?;
    let time_scale = if r.flag()? { Some(r.f64()?) } else { None };
    let model = ModelConfig {
        dim,
        feature_dim,
        features,
        aggregator,
        mechanisms,
        theta,
        phi,
        fusion,
        aggregation_size,
        lambda_u,
        alpha_v,
        time_scale,
        loss_norm: r.tag(&NORMS)?,
        leaky_slope: r.f64()?,
        history_policy: r.tag(&POLICIES)?,
        exclude_partner: r.flag()?,
        target: r.tag(&TARGETS)?,
    };
    let train = TrainConfig {
        epochs: r.usize()?,
        learning_rate: r.f64()?,
        l2_penalty: r.f64()?,
        bptt_window: r.usize()?,
        max_segment: r.usize()?,
        seed: r.u64()?,
        select: r.tag(&SELECTS)?,
        state_carry: r.tag(&CARRIES)?,
    };
    Ok((model, train))
}

fn put_snapshot(w: &mut Writer, s: &GraphSnapshot) {
    w.usize(s.dim());
    w.f64(s.now);
    for (states, histories) in [(&s.users, &s.user_history), (&s.items, &s.item_history)] {
        w.usize(states.len());
        for (state, history) in states.iter().zip(histories) {
            w.floats(&state.embedding);
            match state.last_time {
                Some(t) => {
                    w.u8(1);
                    w.f64(t);
                }
                None => w.u8(0),
            }
            w.usize(history.capacity());
            w.usize(history.len());
            for e in history.iter() {
                w.usize(e.partner);
                w.f64(e.time);
                w.floats(&e.embedding);
            }
        }
    }
}

fn get_snapshot(r: &mut Reader<'_>) -> Result<GraphSnapshot> {
    let dim = r.usize()?;
    let now = r.f64()?;
    let mut tables = Vec::with_capacity(2);
    for _ in 0..2 {
        let n = r.len(8 * 4)?;
        let (mut states, mut histories) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let embedding = r.floats()?.into();
            let last_time = if r.flag()? { Some(r.f64()?) } else { None };
            states.push(EntityState { embedding, last_time });
            let mut history = NeighborHistory::new(r.usize()?);
            let len = r.len(8 * 3)?;
            if len > history.capacity() {
                return Err(corrupt(r.what, "history longer than its capacity"));
            }
            for _ in 0..len {
                history.push(HistoryEntry { partner: r.usize()?, time: r.f64()?, embedding: r.floats()?.into() });
            }
            histories.push(history);
        }
        tables.push((states, histories));
    }
    let (items, item_history) = tables.pop().expect("two tables");
    let (users, user_history) = tables.pop().expect("two tables");
    GraphSnapshot::from_parts(dim, users, items, user_history, item_history, now).map_err(|e| corrupt(r.what, e))
}

fn config_section(model: &ModelConfig, train: &TrainConfig) -> Writer {
    let mut w = Writer::default();
    put_configs(&mut w, model, train);
    w
}

/// Stable 16-hex-digit identifier of a model and training configuration.
pub fn fingerprint(model: &ModelConfig, train: &TrainConfig) -> String {
    format!("{:016x}", CRC.checksum(&config_section(model, train).0))
}

pub fn encode(c: &Checkpoint) -> Vec<u8> {
    let mut out = Writer::default();
    out.0.extend_from_slice(MAGIC);
    out.0.extend_from_slice(&VERSION.to_le_bytes());

    let mut config = config_section(&c.model, &c.train);
    config.usize(c.epoch);
    config.u64(c.seed);
    out.section(config);

    let mut params = Writer::default();
    params.matrices(c.params.tensors());
    out.section(params);

    let mut opt = Writer::default();
    let a = &c.optimizer.config;
    for v in [a.learning_rate, a.beta1, a.beta2, a.epsilon, a.weight_decay] {
        opt.f64(v);
    }
    opt.u64(c.optimizer.step);
    opt.matrices(&c.optimizer.first_moment);
    opt.matrices(&c.optimizer.second_moment);
    out.section(opt);

    let mut states = Writer::default();
    put_snapshot(&mut states, &c.initial);
    put_snapshot(&mut states, &c.states);
    out.section(states);

    let sum = CRC.checksum(&out.0);
    out.u64(sum);
    out.0
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 2 + 8 || &bytes[..4] != MAGIC {
        return Err(Error::Integrity("not a checkpoint file".into()));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(sum.try_into().expect("8 bytes"));
    if CRC.checksum(body) != stored {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != VERSION {
        return Err(Error::Integrity(format!("unsupported format version {version}")));
    }
    let mut r = Reader { bytes: &body[6..], what: "header" };

    let mut s = r.section("config")?;
    let (model, train) = get_configs(&mut s)?;
    let epoch = s.usize()?;
    let seed = s.u64()?;
    s.finish()?;

    let mut s = r.section("params")?;
    let params = ModelParams::from_tensors(&model, s.matrices()?).map_err(|e| corrupt("params", e))?;
    s.finish()?;

    let mut s = r.section("optimizer")?;
    let config = AdamConfig {
        learning_rate: s.f64()?,
        beta1: s.f64()?,
        beta2: s.f64()?,
        epsilon: s.f64()?,
        weight_decay: s.f64()?,
    };
    let optimizer = AdamState { config, step: s.u64()?, first_moment: s.matrices()?, second_moment: s.matrices()? };
    s.finish()?;
    let shapes = |ms: &[DenseMatrix]| ms.iter().map(DenseMatrix::shape).collect::<Vec<_>>();
    let expected = shapes(params.tensors());
    if shapes(&optimizer.first_moment) != expected || shapes(&optimizer.second_moment) != expected {
        return Err(corrupt("optimizer", "moment shapes do not match the parameters"));
    }

    let mut s = r.section("states")?;
    let initial = get_snapshot(&mut s)?;
    let states = get_snapshot(&mut s)?;
    s.finish()?;
    r.finish()?;
    if initial.dim() != model.dim || states.dim() != model.dim {
        return Err(corrupt("states", "embedding dimension differs from the model"));
    }

    Ok(Checkpoint { model, train, params, optimizer, initial, states, epoch, seed })
}

pub fn save(path: &Path, c: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode(c)).map_err(|source| Error::Io { path: path.to_owned(), source })
}

/// A missing or unreadable file is an integrity error: the checkpoint the
/// caller asked for cannot be trusted to exist.
pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}
