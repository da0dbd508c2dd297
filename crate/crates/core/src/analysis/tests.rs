use super::*;
use crate::data::{make_synthetic, SyntheticKind};
use crate::layers::Layer;
use crate::network::{parse_architecture, Architecture, Stage};
use crate::tensor::Tensor;
use crate::training::{evaluate, train, TrainConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Nine residual attention stages of width 5: 4·25 = 100 parameters each.
fn attention_stack(depth: usize) -> Architecture {
    let stages = (0..depth).map(|_| Stage::residual(vec![Layer::attention(5)])).collect();
    Architecture::new(&[2, 5], 5, vec![], stages, vec![Layer::token_mean()]).unwrap()
}

fn r(n: i64) -> Rational {
    Rational::from_integer(n)
}

#[test]
fn nine_stages_of_one_hundred() {
    let arch = attention_stack(9);
    assert!(arch.stage_param_counts().iter().all(|&p| p == 100));
    let net = Network::<f64>::replacement(arch.clone(), 4, (0.5, 0.5), 0).unwrap();
    let rep = param_counts(&net);
    assert_eq!((rep.p, rep.p_prime, rep.live_trainable), (900, 704, 704));
    assert_eq!(rep.p_prime_single_pair, 702);
    assert_eq!(rep.reduction, 196);
    assert_eq!(rep.bounds.unwrap().exact, (196, 196));
    let e2e = param_counts(&Network::<f64>::end_to_end(arch, 0));
    assert_eq!((e2e.p, e2e.p_prime, e2e.live_trainable), (900, 900, 900));
}

#[test]
fn two_parameter_stage_gains_nothing() {
    let stages = (0..3).map(|_| Stage::plain(vec![Layer::dense(1, 1)])).collect();
    let arch = Architecture::new(&[1], 1, vec![], stages, vec![]).unwrap();
    let rep = param_counts(&Network::<f64>::replacement(arch, 2, (0.5, 0.5), 0).unwrap());
    assert_eq!(rep.frozen, vec![2]);
    assert_eq!(rep.reduction, 0);
    assert!(rep.live_matches());
}

#[test]
fn bounds_examples() {
    let b = reduction_bounds(9, 4, 100, 100).unwrap();
    assert_eq!(b.exact, (196, 196));
    assert_eq!(b.asymptotic, (r(223), r(223)));
    assert_eq!(reduction_bounds(8, 4, 100, 100).unwrap().exact, (98, 98));
    let b = reduction_bounds(12, 4, 10, 30).unwrap();
    assert_eq!(b.exact, (16, 56));
    assert!(reduction_bounds(9, 4, 5, 4).is_err());
    assert!(reduction_bounds(9, 4, 0, 4).is_err());
    assert!(reduction_bounds(9, 1, 1, 4).is_err());
}

#[test]
fn complexity_examples() {
    let c = complexity_estimate(9, 4).unwrap();
    assert_eq!((c.total, c.reduction), (r(23), r(4)));
    assert_eq!(complexity_estimate(9, 1).unwrap().reduction, r(16));
    assert_eq!(c.bound_k1, r(16));
    assert_eq!(complexity_estimate(9, 8).unwrap().reduction, r(2));
    assert_eq!(c.bound_k_last, r(2));
    assert_eq!(complexity_estimate(10, 4).unwrap().total, Rational::new(51, 2));
    assert!(complexity_estimate(1, 2).is_err());
}

proptest! {
    #[test]
    fn complexity_reduction_decreases_in_k(l in 2usize..200, k in 1usize..50) {
        let a = complexity_estimate(l, k).unwrap();
        let b = complexity_estimate(l, k + 1).unwrap();
        prop_assert!(b.reduction < a.reduction);
        prop_assert_eq!(a.total + a.reduction, r(3 * l as i64));
    }

    #[test]
    fn stage_sizes_within_bounds(depth in 3usize..14, k in 2usize..5) {
        let net = Network::<f64>::replacement(parse_architecture(&format!("mlp-{depth}x3"), &[2], 2).unwrap(), k, (0.5, 0.5), 0).unwrap();
        let rep = param_counts(&net);
        prop_assert!(rep.replaceable_params.iter().all(|&p| rep.p_min <= p && p <= rep.p_max));
        prop_assert!(rep.live_matches());
        prop_assert!(rep.p_prime <= rep.p);
    }
}

fn gaussian(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
    Tensor::from_f64(shape, &data).unwrap()
}

#[test]
fn cka_basic_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = gaussian(&mut rng, &[96, 6]);
    assert!((linear_cka(&x, &x).unwrap().unwrap() - 1.0).abs() < 1e-12);
    let noise = gaussian(&mut rng, &[96, 40]);
    let proj = crate::tensor::matmul(&noise, &gaussian(&mut rng, &[40, 6])).unwrap();
    assert!(linear_cka(&x, &proj).unwrap().unwrap() < 0.1);
    let y = gaussian(&mut rng, &[96, 3]);
    let base = linear_cka(&x, &y).unwrap().unwrap();
    assert!((linear_cka(&x.scale(7.5), &y.scale(0.01)).unwrap().unwrap() - base).abs() < 1e-9);
    let flat = Tensor::filled(&[96, 3], 2.0);
    assert_eq!(linear_cka(&x, &flat).unwrap(), None);
}

#[test]
fn cka_matrix_shape_and_csv() {
    let arch = parse_architecture("mlp-5x6", &[2], 2).unwrap();
    let mut net = Network::<f64>::replacement(arch, 2, (0.5, 0.5), 1).unwrap();
    net.jitter(0, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let probe = gaussian(&mut rng, &[32, 2]);
    let m = cka_matrix(&net, &probe).unwrap();
    assert_eq!(m.len(), 5);
    assert!(m.max_asymmetry() <= 1e-9);
    for i in 1..=5 {
        if let Some(v) = m.get(i, i) {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }
    let csv = m.to_csv();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("stage,1,2,3,4,5\n"));
    assert!(cka_matrix(&net, &gaussian(&mut rng, &[4, 2])).is_err());
}

#[test]
fn probes() {
    let (train_set, test_set) = make_synthetic(SyntheticKind::Blobs, 300, 3, 0.15, 2).unwrap().train_test_split(0.3, 1);
    let arch = parse_architecture("mlp-3x16", &[2], 3).unwrap();
    let mut net = Network::<f64>::end_to_end(arch, 3);
    let cfg = ProbeConfig {
        epochs: 30,
        ..ProbeConfig::default()
    };
    let untrained = linear_probe(&net, &train_set, &test_set, 1, &cfg).unwrap();
    assert!(untrained > 0.5, "{untrained}");
    assert_eq!(untrained, linear_probe(&net, &train_set, &test_set, 1, &cfg).unwrap());

    let rec = train(&mut net, &train_set, &test_set, &TrainConfig { epochs: 15, ..TrainConfig::default() }).unwrap();
    let (_, own) = evaluate(&net, &test_set, 64).unwrap();
    assert_eq!(own, rec.summary.final_test_acc);
    let last = linear_probe(&net, &train_set, &test_set, 3, &cfg).unwrap();
    assert!(last >= own - 0.01, "probe {last} vs network {own}");
    assert!(linear_probe(&net, &train_set, &test_set, 4, &cfg).is_err());
}
