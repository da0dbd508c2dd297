//! Trains a replacement-mode MLP on spirals, then compares stage
//! representations with linear CKA and per-stage linear probes.
//!
//! ```text
//! cargo run --release --example representations
//! ```

use replearn::analysis::{cka_matrix, linear_probe, ProbeConfig};
use replearn::data::{make_synthetic, SyntheticKind};
use replearn::network::{parse_architecture, Network};
use replearn::training::{train, TrainConfig};

fn main() -> replearn::Result<()> {
    let data = make_synthetic(SyntheticKind::Spirals, 1000, 2, 0.05, 0)?;
    let (train_set, test_set) = data.train_test_split(0.2, 0);
    let arch = parse_architecture("mlp-9x32", &[2], 2)?;
    let mut net = Network::<f64>::replacement(arch, 4, (0.5, 0.5), 1)?;
    let cfg = TrainConfig {
        epochs: 30,
        seed: 1,
        ..TrainConfig::default()
    };
    let record = train(&mut net, &train_set, &test_set, &cfg)?;
    println!("test accuracy {:.3}", record.summary.final_test_acc);

    let all: Vec<usize> = (0..test_set.len()).collect();
    let (probe_x, _) = test_set.batch::<f64>(&all);
    let cka = cka_matrix(&net, &probe_x)?;
    print!("{}", cka.to_csv());
    for &i in net.plan().frozen() {
        println!("stage {i} is most similar to stage {:?}", cka.most_similar(i));
    }

    let probe = ProbeConfig {
        epochs: 30,
        ..ProbeConfig::default()
    };
    for layer in 0..=net.depth() {
        let acc = linear_probe(&net, &train_set, &test_set, layer, &probe)?;
        let tag = if net.is_frozen(layer) { " (frozen)" } else { "" };
        println!("probe h{layer}: {acc:.3}{tag}");
    }
    Ok(())
}
