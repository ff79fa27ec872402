//! Epoch loop: t-batched forward passes, truncated back-propagation through
//! time, Adam updates and validation-based model selection.
//!
//! Clocks are not available here; callers that want wall-clock timings wrap
//! [`Trainer::run_epoch`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::adam::{AdamConfig, AdamState};
use crate::autodiff::{NodeId, Tape};
use crate::data::Splits;
use crate::error::{Error, Result};
use crate::metrics::{mrr, recall_at_k};
use crate::model::{rank_of, Forward, ModelConfig, ModelParams, StepInputs};
use crate::store::{GraphSnapshot, Interaction, Side};
use crate::tbatch::{assign_batches, TBatchSchedule};

/// Interactions per backward segment unless configured otherwise.
pub const DEFAULT_MAX_SEGMENT: usize = 500;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StateCarry {
    /// Each epoch starts from the embeddings the previous training pass
    /// ended with.
    #[default]
    Carry,
    /// Each epoch starts from the initial random embeddings.
    Reset,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SelectMetric {
    #[default]
    Mrr,
    Recall10,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_penalty: f64,
    /// t-batches per backward segment.
    pub bptt_window: usize,
    /// Upper bound on interactions per backward segment; larger t-batches
    /// are cut into pieces.
    pub max_segment: usize,
    pub seed: u64,
    pub select: SelectMetric,
    pub state_carry: StateCarry,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 1e-3,
            l2_penalty: 1e-3,
            bptt_window: 1,
            max_segment: DEFAULT_MAX_SEGMENT,
            seed: 0,
            select: SelectMetric::Mrr,
            state_carry: StateCarry::Carry,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config("learning rate must be non-negative"));
        }
        if self.l2_penalty.is_nan() || self.l2_penalty < 0.0 {
            return Err(Error::Config("L2 penalty must be non-negative"));
        }
        if self.bptt_window == 0 || self.max_segment == 0 {
            return Err(Error::Config("BPTT window and segment size must be positive"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, weight_decay: self.l2_penalty, ..AdamConfig::default() }
    }
}

/// Everything needed to resume training or to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub params: ModelParams,
    pub optimizer: AdamState,
    /// Embeddings at the start of training, kept for [`StateCarry::Reset`].
    pub initial: GraphSnapshot,
    /// State after the last training pass (before validation).
    pub states: GraphSnapshot,
    pub epoch: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 0 is the untrained baseline.
    pub epoch: usize,
    /// Mean per-interaction training loss.
    pub loss: f64,
    pub val_mrr: f64,
    pub val_recall10: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub ranks: Vec<usize>,
    pub mrr: f64,
    pub recall10: f64,
}

impl Evaluation {
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        Ok(Evaluation { mrr: mrr(&ranks)?, recall10: recall_at_k(&ranks, 10)?, ranks })
    }
}

/// Mean elapsed time between consecutive interactions of the same entity,
/// over both sides; 1 when no entity repeats.
pub fn mean_inter_event_interval(log: &[Interaction]) -> f64 {
    let mut last: BTreeMap<(Side, usize), f64> = BTreeMap::new();
    let (mut total, mut count) = (0.0, 0usize);
    for x in log {
        for key in [(Side::User, x.user), (Side::Item, x.item)] {
            if let Some(prev) = last.insert(key, x.time) {
                total += x.time - prev;
                count += 1;
            }
        }
    }
    if count == 0 || total <= 0.0 {
        1.0
    } else {
        total / count as f64
    }
}

/// Time from each interaction to its user's next interaction in `log`;
/// zero for a user's last one.
pub fn time_to_next_user_event(log: &[Interaction]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; log.len()];
    let mut next: BTreeMap<usize, f64> = BTreeMap::new();
    for (pos, x) in log.iter().enumerate().rev() {
        if let Some(t) = next.insert(x.user, x.time) {
            out[pos] = t - x.time;
        }
    }
    out
}

/// Applies `log` to `snap` in order without recording gradients.
pub fn teacher_force(
    params: &ModelParams,
    cfg: &ModelConfig,
    snap: &mut GraphSnapshot,
    log: &[Interaction],
) -> Result<()> {
    let mut tape = Tape::new();
    for x in log {
        apply_one(&mut tape, params, cfg, snap, x)?;
    }
    Ok(())
}

fn apply_one(
    tape: &mut Tape,
    params: &ModelParams,
    cfg: &ModelConfig,
    snap: &mut GraphSnapshot,
    x: &Interaction,
) -> Result<()> {
    tape.clear();
    let inputs = StepInputs::gather(tape, snap, cfg, x, 0.0)?;
    let (u, v) = Forward::new(tape, params, cfg).update(&inputs)?;
    let (u, v) = (tape.value(u).as_slice().into(), tape.value(v).as_slice().into());
    snap.record_interaction(x, u, v)
}

/// Scores every interaction of `log` before applying it: the user's state is
/// projected to the interaction time, all items are ranked by distance to
/// the prediction, and the true item's rank is recorded.
pub fn evaluate_stream(
    params: &ModelParams,
    cfg: &ModelConfig,
    snap: &mut GraphSnapshot,
    log: &[Interaction],
) -> Result<Evaluation> {
    let mut tape = Tape::new();
    let mut ranks = Vec::with_capacity(log.len());
    for x in log {
        ranks.push(rank_one(&mut tape, params, cfg, snap, x)?);
        apply_one(&mut tape, params, cfg, snap, x)?;
    }
    Evaluation::from_ranks(ranks)
}

fn rank_one(
    tape: &mut Tape,
    params: &ModelParams,
    cfg: &ModelConfig,
    snap: &GraphSnapshot,
    x: &Interaction,
) -> Result<usize> {
    tape.clear();
    let user = snap.state(Side::User, x.user)?;
    let (fu, _) = cfg.feature_inputs(x.user, x.item, &x.features);
    let pred = Forward::new(tape, params, cfg).predict(&user.embedding, user.elapsed(x.time), &fu)?;
    rank_of(tape.value(pred).as_slice(), snap.item_embeddings(), x.item)
}

/// Evaluates `target` from the checkpoint's post-training state after
/// streaming `warmup` (typically the validation split) through it.
pub fn evaluate(ckpt: &Checkpoint, warmup: &[Interaction], target: &[Interaction]) -> Result<Evaluation> {
    let mut snap = ckpt.states.clone();
    teacher_force(&ckpt.params, &ckpt.model, &mut snap, warmup)?;
    evaluate_stream(&ckpt.params, &ckpt.model, &mut snap, target)
}

/// Stateful training run over a chronologically split log.
pub struct Trainer<'d> {
    log: &'d [Interaction],
    splits: Splits,
    model: ModelConfig,
    train: TrainConfig,
    params: ModelParams,
    optimizer: AdamState,
    initial: GraphSnapshot,
    states: GraphSnapshot,
    schedule: TBatchSchedule,
    future_dt: Vec<f64>,
    epoch: usize,
    seed: u64,
    history: Vec<EpochRecord>,
    best: Option<(f64, Checkpoint)>,
}

impl<'d> Trainer<'d> {
    /// Draws parameters and then embeddings from `rng`. A `None` time scale
    /// is resolved from the training split.
    pub fn new<R: Rng + ?Sized>(
        log: &'d [Interaction],
        splits: Splits,
        num_users: usize,
        num_items: usize,
        mut model: ModelConfig,
        train: TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if model.time_scale.is_none() {
            model.time_scale = Some(mean_inter_event_interval(&log[splits.train.clone()]));
        }
        model.validate()?;
        train.validate()?;
        let params = ModelParams::init(&model, rng)?;
        let initial = GraphSnapshot::init(num_users, num_items, model.dim, model.aggregation_size, rng)?;
        let optimizer = AdamState::new(train.adam(), params.tensors());
        let ckpt = Checkpoint {
            model,
            seed: train.seed,
            train,
            params,
            optimizer,
            states: initial.clone(),
            initial,
            epoch: 0,
        };
        Self::resume(log, splits, ckpt)
    }

    /// Continues from `ckpt`, whose `epoch` epochs are already done.
    pub fn resume(log: &'d [Interaction], splits: Splits, ckpt: Checkpoint) -> Result<Self> {
        ckpt.model.validate()?;
        ckpt.train.validate()?;
        if splits.test.end > log.len() {
            return Err(Error::Domain("splits exceed the log"));
        }
        let train_log = &log[splits.train.clone()];
        let schedule = assign_batches(train_log)?;
        let future_dt = time_to_next_user_event(train_log);
        Ok(Trainer {
            log,
            splits,
            model: ckpt.model,
            train: ckpt.train,
            params: ckpt.params,
            optimizer: ckpt.optimizer,
            initial: ckpt.initial,
            states: ckpt.states,
            schedule,
            future_dt,
            epoch: ckpt.epoch,
            seed: ckpt.seed,
            history: Vec::new(),
            best: None,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.train.epochs
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.model
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn schedule(&self) -> &TBatchSchedule {
        &self.schedule
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    fn train_log(&self) -> &'d [Interaction] {
        &self.log[self.splits.train.clone()]
    }

    fn validation_log(&self) -> &'d [Interaction] {
        &self.log[self.splits.validation.clone()]
    }

    fn epoch_start_states(&self) -> GraphSnapshot {
        let mut snap = match self.train.state_carry {
            StateCarry::Carry => self.states.clone(),
            StateCarry::Reset => self.initial.clone(),
        };
        snap.rewind();
        snap
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            train: self.train.clone(),
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            initial: self.initial.clone(),
            states: self.states.clone(),
            epoch: self.epoch,
            seed: self.seed,
        }
    }

    /// Best checkpoint by the selection metric among epochs run by this
    /// trainer; earlier epochs win ties.
    pub fn best(&self) -> Option<&Checkpoint> {
        self.best.as_ref().map(|(_, c)| c)
    }

    fn validate_from(&self, mut snap: GraphSnapshot) -> Result<Evaluation> {
        evaluate_stream(&self.params, &self.model, &mut snap, self.validation_log())
    }

    /// Scores the current parameters without training: one forward pass over
    /// the training split, then validation. Recorded as epoch 0 when no
    /// epoch has run yet.
    pub fn baseline(&mut self) -> Result<EpochRecord> {
        let mut snap = self.epoch_start_states();
        let mut tape = Tape::new();
        let mut total = 0.0;
        let train_log = self.train_log();
        for (pos, x) in train_log.iter().enumerate() {
            tape.clear();
            let inputs = StepInputs::gather(&mut tape, &snap, &self.model, x, self.future_dt[pos])?;
            let out = Forward::new(&mut tape, &self.params, &self.model).step(&inputs)?;
            total += tape.value(out.loss).get(0, 0);
            let u = tape.value(out.user).as_slice().into();
            let v = tape.value(out.item).as_slice().into();
            snap.record_interaction(x, u, v)?;
        }
        let eval = self.validate_from(snap)?;
        let rec = EpochRecord {
            epoch: self.epoch,
            loss: total / train_log.len().max(1) as f64,
            val_mrr: eval.mrr,
            val_recall10: eval.recall10,
        };
        if self.epoch == 0 {
            self.history.push(rec);
        }
        Ok(rec)
    }

    /// One training epoch followed by validation.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.epoch + 1;
        let mut snap = self.epoch_start_states();
        let loss = self.train_pass(&mut snap, epoch)?;
        self.states = snap;
        self.epoch = epoch;

        let eval = self.validate_from(self.states.clone())?;
        let rec = EpochRecord { epoch, loss, val_mrr: eval.mrr, val_recall10: eval.recall10 };
        self.history.push(rec);

        let score = match self.train.select {
            SelectMetric::Mrr => eval.mrr,
            SelectMetric::Recall10 => eval.recall10,
        };
        if self.best.as_ref().is_none_or(|(b, _)| score > *b) {
            self.best = Some((score, self.checkpoint()));
        }
        Ok(rec)
    }

    /// Runs the remaining epochs.
    pub fn run(&mut self) -> Result<&[EpochRecord]> {
        while !self.is_done() {
            self.run_epoch()?;
        }
        Ok(&self.history)
    }

    fn train_pass(&mut self, snap: &mut GraphSnapshot, epoch: usize) -> Result<f64> {
        let log = self.train_log();
        let mut tape = Tape::new();
        // entity -> node of its embedding inside the current segment
        let mut live: BTreeMap<(Side, usize), NodeId> = BTreeMap::new();
        let mut losses: Vec<NodeId> = Vec::new();
        let mut batches_in_segment = 0;
        let mut total = 0.0;

        let schedule = core::mem::replace(&mut self.schedule, TBatchSchedule::from_batches(Vec::new()));
        let result = (|| -> Result<()> {
            for (b, batch) in schedule.batches().iter().enumerate() {
                let pieces: Vec<&[usize]> = batch.chunks(self.train.max_segment).collect();
                for (i, piece) in pieces.iter().enumerate() {
                    for &pos in piece.iter() {
                        let x = &log[pos];
                        let mut inputs = StepInputs::gather(&mut tape, snap, &self.model, x, self.future_dt[pos])?;
                        if let Some(&n) = live.get(&(Side::User, x.user)) {
                            inputs.user_prev = n;
                        }
                        if let Some(&n) = live.get(&(Side::Item, x.item)) {
                            inputs.item_prev = n;
                        }
                        let out = Forward::new(&mut tape, &self.params, &self.model)
                            .step(&inputs)
                            .map_err(|e| match e {
                                Error::NonFinite { .. } => Error::NonFiniteLoss { epoch, batch: b },
                                other => other,
                            })?;
                        losses.push(out.loss);
                        let u = tape.value(out.user).as_slice().into();
                        let v = tape.value(out.item).as_slice().into();
                        snap.record_interaction(x, u, v)?;
                        live.insert((Side::User, x.user), out.user);
                        live.insert((Side::Item, x.item), out.item);
                    }
                    let batch_done = i + 1 == pieces.len();
                    if batch_done {
                        batches_in_segment += 1;
                    }
                    let last = batch_done && b + 1 == schedule.len();
                    if batches_in_segment >= self.train.bptt_window
                        || losses.len() >= self.train.max_segment
                        || last
                    {
                        total += self.backward_and_step(&mut tape, &losses, epoch, b)?;
                        tape.clear();
                        live.clear();
                        losses.clear();
                        batches_in_segment = 0;
                    }
                }
            }
            Ok(())
        })();
        self.schedule = schedule;
        result?;
        Ok(total / log.len().max(1) as f64)
    }

    fn backward_and_step(&mut self, tape: &mut Tape, losses: &[NodeId], epoch: usize, batch: usize) -> Result<f64> {
        if losses.is_empty() {
            return Ok(0.0);
        }
        let root = if losses.len() == 1 { losses[0] } else { tape.add_n(losses)? };
        let value = tape.value(root).get(0, 0);
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch });
        }
        let grads = tape.backward(root)?;
        let grads: Vec<_> = self
            .params
            .tensors()
            .iter()
            .enumerate()
            .map(|(slot, t)| grads.param_or_zeros(slot, t))
            .collect();
        self.optimizer.step(&mut self.params.tensors_mut(), &grads)?;
        if !self.params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch });
        }
        Ok(value)
    }
}

/// Result of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub history: Vec<EpochRecord>,
}

/// Baseline plus every configured epoch.
pub fn train<R: Rng + ?Sized>(
    log: &[Interaction],
    splits: Splits,
    num_users: usize,
    num_items: usize,
    model: ModelConfig,
    config: TrainConfig,
    rng: &mut R,
) -> Result<TrainOutcome> {
    let mut t = Trainer::new(log, splits, num_users, num_items, model, config, rng)?;
    t.baseline()?;
    t.run()?;
    let last = t.checkpoint();
    let best = t.best().cloned().unwrap_or_else(|| last.clone());
    Ok(TrainOutcome { best, last, history: t.history })
}
