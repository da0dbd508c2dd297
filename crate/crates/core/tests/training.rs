//! Training and analysis through the public library API.

use replearn::analysis::{linear_probe, param_counts, ProbeConfig};
use replearn::cli::{metrics_csv, Comparison};
use replearn::data::{make_synthetic, SyntheticKind};
use replearn::network::{parse_architecture, Network};
use replearn::training::{train, TrainConfig};

#[test]
fn three_layer_mlp_fits_small_spirals() {
    let data = make_synthetic(SyntheticKind::Spirals, 200, 2, 0.05, 1).unwrap();
    // Stem, one stage and the head: three dense layers.
    let arch = parse_architecture("mlp-1x64", &[2], 2).unwrap();
    let mut net = Network::<f64>::end_to_end(arch, 1);
    let cfg = TrainConfig {
        epochs: 100,
        batch_size: 16,
        seed: 1,
        ..TrainConfig::default()
    };
    let rec = train(&mut net, &data, &data, &cfg).unwrap();
    assert!(rec.summary.final_train_acc > 0.95, "{:?}", rec.summary);
}

#[test]
fn untrained_probe_on_blobs_beats_chance() {
    let data = make_synthetic(SyntheticKind::Blobs, 300, 3, 0.05, 2).unwrap();
    let (tr, te) = data.train_test_split(0.3, 2);
    let net = Network::<f64>::end_to_end(parse_architecture("mlp-3x16", &[2], 3).unwrap(), 4);
    let acc = linear_probe(&net, &tr, &te, 1, &ProbeConfig::default()).unwrap();
    assert!(acc > 1.0 / 3.0 + 0.2, "{acc}");
}

#[test]
fn comparison_reports_exact_parameter_saving() {
    let data = make_synthetic(SyntheticKind::Blobs, 120, 2, 0.05, 0).unwrap();
    let (tr, te) = data.train_test_split(0.25, 0);
    let arch = parse_architecture("mlp-6x8", &[2], 2).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let mut e2e = Network::<f64>::end_to_end(arch.clone(), 0);
    let mut rep = Network::<f64>::replacement(arch, 2, (0.5, 0.5), 0).unwrap();
    let a = train(&mut e2e, &tr, &te, &cfg).unwrap();
    let b = train(&mut rep, &tr, &te, &cfg).unwrap();
    let report = param_counts(&rep);
    let (pa, pb) = Comparison::new(&a, &b).get("trainable_params").unwrap();
    assert_eq!(pa - pb, report.reduction as f64);
    assert_eq!(b.summary.trainable_params, report.p_prime);
    // Every step writes exactly the trainable set.
    assert_eq!(b.summary.grad_writes, report.p_prime);
}

#[test]
fn reruns_produce_identical_metrics() {
    let data = make_synthetic(SyntheticKind::Spirals, 160, 2, 0.05, 5).unwrap();
    let (tr, te) = data.train_test_split(0.25, 5);
    let masked = || {
        let mut net = Network::<f32>::replacement(parse_architecture("mlp-5x8", &[2], 2).unwrap(), 2, (0.5, 0.5), 9).unwrap();
        let rec = train(&mut net, &tr, &te, &TrainConfig { epochs: 3, seed: 9, ..TrainConfig::default() }).unwrap();
        metrics_csv(&rec)
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f[5] = "-";
                f.join(",")
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(masked(), masked());
}
