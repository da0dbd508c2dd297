//! Optimizers, learning-rate schedules, and the training loop.

mod optim;
mod schedule;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::endtoend;
use crate::error::{Error, Result};
use crate::layers::softmax_xent;
use crate::network::{Mode, Network};
use crate::replacement::{self, GradTape, Trace};
use crate::tensor::{Element, Tensor};

pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState, ScalarRule};
pub use schedule::{Schedule, ScheduleKind};

/// Loss above this, or a non-finite loss, halts a run.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            schedule: ScheduleKind::Cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub lr: f64,
    pub epoch_seconds: f64,
    /// Gradient scalars handed to the optimizer per step.
    pub grad_writes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub best_test_acc: f64,
    pub final_test_acc: f64,
    pub final_train_acc: f64,
    /// Every parameter of the architecture (`P`).
    pub total_params: usize,
    /// Live trainable scalars (`P′` in replacement mode).
    pub trainable_params: usize,
    pub frozen: Vec<usize>,
    pub grad_writes: usize,
    /// Epoch at which the loss diverged, if it did.
    pub diverged: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<EpochRow>,
    pub summary: RunSummary,
}

/// Forward pass dispatched on the network's mode.
pub fn forward<E: Element>(net: &Network<E>, input: &Tensor<E>) -> Result<Trace<E>> {
    match net.mode() {
        Mode::EndToEnd => endtoend::forward(net, input),
        Mode::Replacement => replacement::forward_pass(net, input),
    }
}

pub fn backward<E: Element>(net: &Network<E>, trace: &mut Trace<E>, loss_grad: &Tensor<E>) -> Result<GradTape<E>> {
    match net.mode() {
        Mode::EndToEnd => endtoend::backward(net, trace, loss_grad),
        Mode::Replacement => replacement::backward_pass(net, trace, loss_grad),
    }
}

pub(crate) fn correct<E: Element>(logits: &Tensor<E>, labels: &[usize]) -> usize {
    let classes = logits.shape()[1];
    logits
        .data()
        .chunks(classes)
        .zip(labels)
        .filter(|(row, &l)| {
            let best = row
                .iter()
                .enumerate()
                .fold(0, |b, (c, &v)| if v > row[b] { c } else { b });
            best == l
        })
        .count()
}

/// Mean loss and accuracy over `data`, evaluated in batches.
pub fn evaluate<E: Element>(net: &Network<E>, data: &Dataset, batch_size: usize) -> Result<(f64, f64)> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut loss = 0.0;
    let mut hits = 0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = data.batch::<E>(chunk);
        let trace = forward(net, &x)?;
        let (l, _) = softmax_xent(trace.output(), &y)?;
        loss += l.as_f64() * chunk.len() as f64;
        hits += correct(trace.output(), &y);
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, hits as f64 / n))
}

/// One optimizer step on one batch; returns the batch loss, correct count and tape size.
pub fn train_step<E: Element>(
    net: &mut Network<E>,
    opt: &mut OptimizerState<E>,
    x: &Tensor<E>,
    y: &[usize],
    lr: f64,
) -> Result<(f64, usize, usize)> {
    let mut trace = forward(net, x)?;
    let (loss, grad) = softmax_xent(trace.output(), y)?;
    let hits = correct(trace.output(), y);
    let loss = loss.as_f64();
    if !loss.is_finite() || loss > DIVERGENCE_LOSS {
        return Ok((loss, hits, 0));
    }
    let tape = backward(net, &mut trace, &grad)?;
    opt.apply_gradients(net, &tape, lr)?;
    Ok((loss, hits, tape.gradient_elements()))
}

/// Trains `net` in place. Deterministic given the network, data and config.
pub fn train<E: Element>(net: &mut Network<E>, train: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<RunRecord> {
    if cfg.batch_size == 0 {
        return Err(Error::Invalid("batch size must be positive".into()));
    }
    if train.sample_shape() != net.architecture().sample_shape() {
        return Err(Error::ShapeMismatch {
            op: "train",
            left: train.sample_shape().to_vec(),
            right: net.architecture().sample_shape().to_vec(),
        });
    }
    let schedule = Schedule {
        initial_lr: cfg.optimizer.lr,
        total_epochs: cfg.epochs,
        kind: cfg.schedule,
    };
    let mut opt = OptimizerState::new(cfg.optimizer, net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut diverged = None;
    let mut grad_writes = 0;
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let lr = schedule.lr_at(epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0);
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train.batch::<E>(chunk);
            let (loss, h, writes) = train_step(net, &mut opt, &x, &y, lr)?;
            if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                diverged = Some(epoch + 1);
                break;
            }
            loss_sum += loss * chunk.len() as f64;
            hits += h;
            grad_writes = writes;
        }
        if diverged.is_some() {
            log::warn!("{} run diverged at epoch {}", net.mode(), epoch + 1);
            break;
        }
        let (_, test_acc) = evaluate(net, test, cfg.batch_size.max(256))?;
        let n = train.len().max(1) as f64;
        let row = EpochRow {
            epoch: epoch + 1,
            train_loss: loss_sum / n,
            train_acc: hits as f64 / n,
            test_acc,
            lr,
            epoch_seconds: start.elapsed().as_secs_f64(),
            grad_writes,
        };
        log::info!(
            "{} epoch {:>3}: loss {:.4} train {:.3} test {:.3}",
            net.mode(),
            row.epoch,
            row.train_loss,
            row.train_acc,
            row.test_acc
        );
        rows.push(row);
    }
    let last = rows.last();
    let summary = RunSummary {
        mode: net.mode(),
        best_test_acc: rows.iter().map(|r| r.test_acc).fold(0.0, f64::max),
        final_test_acc: last.map_or(0.0, |r| r.test_acc),
        final_train_acc: last.map_or(0.0, |r| r.train_acc),
        total_params: net.architecture().total_param_count(),
        trainable_params: net.trainable_scalar_count(),
        frozen: net.plan().frozen().to_vec(),
        grad_writes,
        diverged,
    };
    Ok(RunRecord { rows, summary })
}

#[cfg(test)]
mod tests;
