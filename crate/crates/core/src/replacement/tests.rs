use super::*;
use crate::endtoend;
use crate::layers::{Layer, Objective};
use crate::network::{Architecture, Block, Network, ParamRef, Slot, Stage};
use proptest::prelude::*;

type T = Tensor<f64>;

fn uniform_mlp(depth: usize, width: usize, relu: bool) -> Architecture {
    let stage = |_| {
        let mut layers = vec![Layer::dense(width, width)];
        if relu {
            layers.push(Layer::relu());
        }
        Stage::plain(layers)
    };
    Architecture::new(&[width], width, vec![], (0..depth).map(stage).collect(), vec![]).unwrap()
}

fn weight(i: usize) -> ParamRef {
    ParamRef::Tensor {
        block: Block::Stage(i),
        slot: Slot::Freezable(0),
    }
}

fn bias(i: usize) -> ParamRef {
    ParamRef::Tensor {
        block: Block::Stage(i),
        slot: Slot::Freezable(1),
    }
}

#[test]
fn frozen_set_examples() {
    assert_eq!(frozen_set(12, 4).unwrap(), vec![4, 8]);
    assert_eq!(frozen_set(3, 4).unwrap(), Vec::<usize>::new());
    assert_eq!(frozen_set(7, 2).unwrap(), vec![2, 4, 6]);
    assert_eq!(frozen_set(8, 4).unwrap(), vec![4]);
    let err = frozen_set(5, 1).unwrap_err();
    assert!(matches!(err, Error::InvalidInterval(1)));
    assert!(err.to_string().contains("adjacent"));
    assert!(frozen_set(5, 0).is_err());
}

#[test]
fn compose_examples() {
    let id = compose_params(2, 1.0, 0.0, &[T::vector(&[1.5, -2.0])], &[T::vector(&[9.0, 9.0])]).unwrap();
    assert_eq!(id, vec![T::vector(&[1.5, -2.0])]);
    let avg = compose_params(2, 0.5, 0.5, &[T::vector(&[2.0])], &[T::vector(&[4.0])]).unwrap();
    assert_eq!(avg, vec![T::vector(&[3.0])]);
    let mix = compose_params(2, 0.3, 0.2, &[T::vector(&[10.0, 0.0])], &[T::vector(&[0.0, 10.0])]).unwrap();
    assert!((mix[0].get(0) - 3.0).abs() < 1e-12 && (mix[0].get(1) - 2.0).abs() < 1e-12);
}

#[test]
fn compose_errors_name_the_frozen_index() {
    let e = compose_params(6, 0.5, 0.5, &[T::vector(&[1.0])], &[T::vector(&[1.0, 2.0])]).unwrap_err();
    assert!(e.to_string().contains("frozen layer 6"), "{e}");
    let e = compose_params(4, 0.5, 0.5, &[T::vector(&[1.0])], &[]).unwrap_err();
    assert!(e.to_string().contains("frozen layer 4"), "{e}");
}

#[test]
fn plan_drops_shape_incompatible_candidates() {
    let mut stages = vec![Stage::plain(vec![Layer::dense(4, 6)])];
    stages.extend((0..5).map(|_| Stage::plain(vec![Layer::dense(6, 6)])));
    let arch = Architecture::new(&[4], 6, vec![], stages, vec![]).unwrap();
    let plan = FreezePlan::<f64>::for_architecture(&arch, 2, (0.5, 0.5)).unwrap();
    assert_eq!(plan.frozen(), &[4]);
    assert_eq!(plan.excluded(), &[2]);
    assert_eq!(plan.interval(), Some(2));
}

/// `h = θ₃·(θ₂·(θ₁·x))` with stage 2 frozen.
fn scalar_chain() -> Network<f64> {
    let stages = (0..3).map(|_| Stage::plain(vec![Layer::dense(1, 1)])).collect();
    let arch = Architecture::new(&[1], 1, vec![], stages, vec![]).unwrap();
    let mut net = Network::replacement(arch, 2, (0.5, 0.5), 0).unwrap();
    for (i, w) in [(1, 2.0), (3, 3.0)] {
        net.set_tensor(&weight(i), T::from_f64(&[1, 1], &[w]).unwrap()).unwrap();
        net.set_tensor(&bias(i), T::vector(&[0.0])).unwrap();
    }
    net
}

#[test]
fn scalar_chain_gradients() {
    let net = scalar_chain();
    let x = T::from_f64(&[1, 1], &[1.0]).unwrap();
    let mut trace = forward_pass(&net, &x).unwrap();
    assert_eq!(trace.composed[&2][0].get(0), 2.5);
    assert_eq!(trace.output().get(0), 15.0);
    let tape = backward_pass(&net, &mut trace, &T::from_f64(&[1, 1], &[1.0]).unwrap()).unwrap();
    assert_eq!(tape.scalar_grads[&2], (12.0, 18.0));
    assert_eq!(tape.param_grads[&1][0].get(0), 10.5);
    assert_eq!(tape.param_grads[&3][0].get(0), 8.0);
    assert!(!tape.param_grads.contains_key(&2));
}

#[test]
fn scalar_chain_matches_hand_derivative_by_differences() {
    // L(θ₁, θ₃, a, b) = (aθ₁ + bθ₃)·θ₁·θ₃
    let loss = |t1: f64, t3: f64, a: f64, b: f64| (a * t1 + b * t3) * t1 * t3;
    let eps = 1e-5;
    let cd = |f: &dyn Fn(f64) -> f64, v: f64| (f(v + eps) - f(v - eps)) / (2.0 * eps);
    assert!((cd(&|a| loss(2.0, 3.0, a, 0.5), 0.5) - 12.0).abs() < 1e-6);
    assert!((cd(&|b| loss(2.0, 3.0, 0.5, b), 0.5) - 18.0).abs() < 1e-6);
    assert!((cd(&|t| loss(t, 3.0, 0.5, 0.5), 2.0) - 10.5).abs() < 1e-6);
    assert!((cd(&|t| loss(2.0, t, 0.5, 0.5), 3.0) - 8.0).abs() < 1e-6);
}

#[test]
fn copy_composition_equals_duplicated_weights() {
    let arch = uniform_mlp(3, 3, false);
    let mut rep = Network::<f64>::replacement(arch.clone(), 2, (1.0, 0.0), 5).unwrap();
    rep.set_coupling(2, 1.0, 0.0).unwrap();
    let mut e2e = Network::<f64>::end_to_end(arch, 5);
    for i in [1, 3] {
        for p in [weight(i), bias(i)] {
            e2e.set_tensor(&p, rep.tensor(&p).unwrap().clone()).unwrap();
        }
    }
    for p in [weight, bias] {
        e2e.set_tensor(&p(2), rep.tensor(&p(1)).unwrap().clone()).unwrap();
    }
    let x = T::from_f64(&[2, 3], &[0.1, -0.4, 0.9, 1.2, 0.0, -0.7]).unwrap();
    let a = forward_pass(&rep, &x).unwrap();
    let b = endtoend::forward(&e2e, &x).unwrap();
    assert_eq!(a.output(), b.output());
}

/// Straight-line rendering of the per-step loop for a dense/ReLU stack.
fn oracle_forward(net: &Network<f64>, x: &[f64], width: usize) -> Vec<f64> {
    let depth = net.depth();
    let own = |i: usize| -> (Vec<f64>, Vec<f64>) {
        let f = net.freezable(i).unwrap();
        (f[0].to_f64_vec(), f[1].to_f64_vec())
    };
    let mut h = x.to_vec();
    for i in 1..=depth {
        let (w, b) = match net.coupling(i) {
            Some((a, c)) => {
                let (wp, bp) = own(i - 1);
                let (wn, bn) = own(i + 1);
                (
                    wp.iter().zip(&wn).map(|(p, n)| a * p + c * n).collect::<Vec<_>>(),
                    bp.iter().zip(&bn).map(|(p, n)| a * p + c * n).collect::<Vec<_>>(),
                )
            }
            None => own(i),
        };
        let rows = h.len() / width;
        let mut out = vec![0.0; h.len()];
        for r in 0..rows {
            for o in 0..width {
                let mut acc = b[o];
                for j in 0..width {
                    acc += h[r * width + j] * w[o * width + j];
                }
                out[r * width + o] = acc.max(0.0);
            }
        }
        h = out;
    }
    h
}

#[test]
fn forward_matches_straight_line_oracle() {
    let width = 4;
    let net = Network::<f64>::replacement(uniform_mlp(5, width, true), 4, (0.3, 0.8), 7).unwrap();
    assert_eq!(net.plan().frozen(), &[4]);
    let x: Vec<f64> = (0..3 * width).map(|v| (v as f64 * 0.37).sin()).collect();
    let out = forward_pass(&net, &T::from_f64(&[3, width], &x).unwrap()).unwrap();
    let expect = oracle_forward(&net, &x, width);
    for (a, b) in out.output().data().iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn empty_plan_matches_end_to_end_bitwise() {
    let arch = uniform_mlp(3, 4, true);
    let rep = Network::<f64>::replacement(arch.clone(), 4, (0.5, 0.5), 11).unwrap();
    assert!(rep.plan().frozen().is_empty());
    let e2e = Network::<f64>::end_to_end(arch, 11);
    let x = T::from_f64(&[2, 4], &[0.3, -1.0, 0.2, 0.8, -0.5, 0.4, 1.1, 0.0]).unwrap();
    let mut a = forward_pass(&rep, &x).unwrap();
    let mut b = endtoend::forward(&e2e, &x).unwrap();
    assert_eq!(a.output(), b.output());
    let g = T::filled(&[2, 4], 0.25);
    assert_eq!(
        backward_pass(&rep, &mut a, &g).unwrap(),
        endtoend::backward(&e2e, &mut b, &g).unwrap()
    );
}

#[test]
fn successor_gradient_is_own_term_plus_routed_term() {
    let arch = uniform_mlp(3, 3, true);
    let net = Network::<f64>::replacement(arch, 2, (0.4, 0.7), 2).unwrap();
    let x = T::from_f64(&[2, 3], &[0.5, -0.2, 0.9, 0.1, 0.6, -0.8]).unwrap();
    let mut trace = forward_pass(&net, &x).unwrap();
    let (_, g) = Objective::SoftmaxXent(vec![0, 2]).evaluate(trace.output()).unwrap();
    let own = {
        let t = &trace.stages[2];
        net.architecture()
            .stage(3)
            .backward(t, net.freezable(3).unwrap(), &[], &g)
            .unwrap()
            .freezable
    };
    let tape = backward_pass(&net, &mut trace, &g).unwrap();
    let g_hat = &tape.composed_grads[&2];
    for j in 0..2 {
        let expect = axpy(0.7, &g_hat[j], &own[j]).unwrap();
        assert_eq!(tape.param_grads[&3][j], expect);
    }
}

#[test]
fn trace_is_consumed_once() {
    let net = scalar_chain();
    let x = T::from_f64(&[1, 1], &[1.0]).unwrap();
    let mut trace = forward_pass(&net, &x).unwrap();
    let g = T::from_f64(&[1, 1], &[1.0]).unwrap();
    backward_pass(&net, &mut trace, &g).unwrap();
    assert!(trace.is_consumed());
    assert!(matches!(backward_pass(&net, &mut trace, &g), Err(Error::TapeConsumed)));
}

proptest! {
    #[test]
    fn frozen_set_invariants(depth in 1usize..60, k in 2usize..12) {
        let f = frozen_set(depth, k).unwrap();
        let expect: Vec<usize> = (1..=depth).filter(|i| i % k == 0 && *i != depth).collect();
        prop_assert_eq!(&f, &expect);
        for w in f.windows(2) {
            prop_assert!(w[1] > w[0] + 1);
        }
        for &i in &f {
            prop_assert!(i >= 2 && i < depth);
        }
    }

    #[test]
    fn composition_is_homogeneous(
        c in -3.0f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0,
        p in prop::collection::vec(-5.0f64..5.0, 4), q in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let (p, q) = (vec![T::vector(&p)], vec![T::vector(&q)]);
        let lhs = compose_params(1, c * a, c * b, &p, &q).unwrap();
        let rhs = compose_params(1, a, b, &p, &q).unwrap()[0].scale(c);
        for (x, y) in lhs[0].data().iter().zip(rhs.data()) {
            let tol = 4.0 * f64::EPSILON * (x.abs().max(y.abs()) + (c * a).abs() * 5.0 + (c * b).abs() * 5.0);
            prop_assert!((x - y).abs() <= tol, "{} vs {}", x, y);
        }
    }

    #[test]
    fn routing_is_exclusive(depth in 3usize..12, k in 2usize..5, seed in 0u64..50) {
        let net = Network::<f64>::replacement(uniform_mlp(depth, 2, true), k, (0.5, 0.5), seed).unwrap();
        let x = T::from_f64(&[1, 2], &[0.3, -0.6]).unwrap();
        let mut trace = forward_pass(&net, &x).unwrap();
        let tape = backward_pass(&net, &mut trace, &T::filled(&[1, 2], 1.0)).unwrap();
        for &i in net.plan().frozen() {
            prop_assert!(!tape.param_grads.contains_key(&i));
        }
        let scalars: Vec<usize> = tape.scalar_grads.keys().copied().collect();
        prop_assert_eq!(scalars.as_slice(), net.plan().frozen());
        prop_assert_eq!(tape.activation_grads.len(), depth + 1);
    }
}
