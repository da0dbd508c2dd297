use super::*;
use crate::data::{make_synthetic, SyntheticKind};
use crate::network::{parse_architecture, Block, ParamRef, Slot};

fn blobs() -> (Dataset, Dataset) {
    make_synthetic(SyntheticKind::Blobs, 200, 2, 0.1, 2).unwrap().train_test_split(0.25, 0)
}

fn sgd(lr: f64) -> OptimizerConfig {
    OptimizerConfig {
        kind: OptimizerKind::Sgd { momentum: 0.0 },
        lr,
        weight_decay: 0.0,
        ..OptimizerConfig::default()
    }
}

#[test]
fn blobs_are_learned() {
    let (train_set, test_set) = blobs();
    let arch = parse_architecture("mlp-3x8", &[2], 2).unwrap();
    let mut net = Network::<f64>::end_to_end(arch, 1);
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let rec = train(&mut net, &train_set, &test_set, &cfg).unwrap();
    assert_eq!(rec.rows.len(), 20);
    assert_eq!(rec.summary.final_train_acc, 1.0);
    assert!(rec.summary.diverged.is_none());
}

#[test]
fn runs_are_deterministic() {
    let (train_set, test_set) = blobs();
    let arch = parse_architecture("mlp-5x6", &[2], 2).unwrap();
    let run = || {
        let mut net = Network::<f32>::replacement(arch.clone(), 2, (0.5, 0.5), 4).unwrap();
        let mut rec = train(&mut net, &train_set, &test_set, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
        rec.rows.iter_mut().for_each(|r| r.epoch_seconds = 0.0);
        (rec, net.param_hash())
    };
    assert_eq!(run(), run());
}

#[test]
fn zero_gradient_step_leaves_network_unchanged() {
    let arch = parse_architecture("mlp-3x4", &[2], 2).unwrap();
    let mut net = Network::<f64>::replacement(arch, 2, (0.5, 0.5), 0).unwrap();
    let before = net.clone();
    let mut trace = replacement::forward_pass(&net, &Tensor::filled(&[1, 2], 0.5)).unwrap();
    let mut tape = replacement::backward_pass(&net, &mut trace, &Tensor::filled(&[1, 2], 0.0)).unwrap();
    tape.scalar_grads.values_mut().for_each(|g| *g = (0.0, 0.0));
    for cfg in [
        sgd(0.1),
        OptimizerConfig {
            weight_decay: 0.0,
            ..OptimizerConfig::default()
        },
    ] {
        let mut opt = OptimizerState::new(cfg, &net);
        opt.apply_gradients(&mut net, &tape, 0.1).unwrap();
        assert_eq!(opt.step_count(), 1);
        assert_eq!(net, before);
    }
}

#[test]
fn weight_decay_skips_coupling_scalars() {
    let arch = parse_architecture("mlp-3x4", &[2], 2).unwrap();
    let mut net = Network::<f64>::replacement(arch, 2, (0.5, 0.5), 0).unwrap();
    let mut trace = replacement::forward_pass(&net, &Tensor::filled(&[1, 2], 0.5)).unwrap();
    let mut tape = replacement::backward_pass(&net, &mut trace, &Tensor::filled(&[1, 2], 0.0)).unwrap();
    tape.scalar_grads.values_mut().for_each(|g| *g = (0.0, 0.0));
    let cfg = OptimizerConfig {
        weight_decay: 0.5,
        ..sgd(0.1)
    };
    let w = ParamRef::Tensor {
        block: Block::Stage(1),
        slot: Slot::Freezable(0),
    };
    let w0 = net.tensor(&w).unwrap().clone();
    OptimizerState::new(cfg, &net).apply_gradients(&mut net, &tape, 0.1).unwrap();
    assert_eq!(net.coupling(2), Some((0.5, 0.5)));
    assert_eq!(net.tensor(&w).unwrap(), &w0.scale(0.95));
}

#[test]
fn scalar_rule_and_multiplier() {
    let arch = parse_architecture("mlp-3x4", &[2], 2).unwrap();
    let mut net = Network::<f64>::replacement(arch, 2, (0.5, 0.5), 3).unwrap();
    let mut trace = replacement::forward_pass(&net, &Tensor::filled(&[2, 2], 0.7)).unwrap();
    let (_, g) = softmax_xent(trace.output(), &[0, 1]).unwrap();
    let tape = replacement::backward_pass(&net, &mut trace, &g).unwrap();
    let (ga, gb) = tape.scalar_grads[&2];
    let cfg = OptimizerConfig {
        scalar_rule: ScalarRule::Sgd,
        scalar_lr_mult: 10.0,
        ..OptimizerConfig::default()
    };
    OptimizerState::new(cfg, &net).apply_gradients(&mut net, &tape, 0.01).unwrap();
    let (a, b) = net.coupling(2).unwrap();
    assert_eq!(a, 0.5 - 0.1 * ga);
    assert_eq!(b, 0.5 - 0.1 * gb);
}

#[test]
fn mismatched_tape_is_rejected() {
    let arch = parse_architecture("mlp-3x4", &[2], 2).unwrap();
    let mut e2e = Network::<f64>::end_to_end(arch.clone(), 0);
    let rep = Network::<f64>::replacement(arch, 2, (0.5, 0.5), 0).unwrap();
    let mut trace = replacement::forward_pass(&rep, &Tensor::filled(&[1, 2], 0.5)).unwrap();
    let tape = replacement::backward_pass(&rep, &mut trace, &Tensor::filled(&[1, 2], 1.0)).unwrap();
    let mut opt = OptimizerState::new(OptimizerConfig::default(), &e2e);
    let before = e2e.clone();
    assert!(matches!(opt.apply_gradients(&mut e2e, &tape, 0.1), Err(Error::TapeMismatch(_))));
    assert_eq!(e2e, before);
    assert_eq!(opt.step_count(), 0);
}

#[test]
fn buffers_cover_exactly_the_trainable_set() {
    let arch = parse_architecture("mlp-9x4", &[2], 2).unwrap();
    let net = Network::<f64>::replacement(arch, 4, (0.5, 0.5), 0).unwrap();
    let opt = OptimizerState::new(OptimizerConfig::default(), &net);
    let mut tracked: Vec<ParamRef> = opt.tracked().copied().collect();
    let mut expect = net.trainable();
    tracked.sort();
    expect.sort();
    assert_eq!(tracked, expect);
}

#[test]
fn divergence_halts_the_run() {
    let (train_set, test_set) = blobs();
    let arch = parse_architecture("mlp-3x8", &[2], 2).unwrap();
    let mut net = Network::<f32>::end_to_end(arch, 1);
    let cfg = TrainConfig {
        epochs: 30,
        optimizer: sgd(1e12),
        schedule: ScheduleKind::Constant,
        ..TrainConfig::default()
    };
    let rec = train(&mut net, &train_set, &test_set, &cfg).unwrap();
    let at = rec.summary.diverged.expect("diverges");
    assert!(at <= 30);
    assert_eq!(rec.rows.len(), at - 1);
}
