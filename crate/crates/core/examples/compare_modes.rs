//! Trains the same network end to end and with replacement learning and
//! prints both runs side by side.
//!
//! ```text
//! cargo run --release --example compare_modes -- spirals mlp-9x64 50
//! cargo run --release --example compare_modes -- mnist convnet-6 50
//! ```

use std::path::PathBuf;
use std::time::Instant;

use replearn::cli::{load_data, run_training, Comparison, DatasetKind, RunConfig};
use replearn::data::SyntheticKind;
use replearn::network::Mode;

fn main() -> replearn::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dataset = args.first().map_or("spirals", String::as_str);
    let arch = args.get(1).map_or("mlp-9x64", String::as_str);
    let epochs = args.get(2).map_or(Ok(20), |e| e.parse()).expect("epochs must be an integer");

    let kind = match dataset {
        "mnist" => DatasetKind::Mnist,
        "blobs" => DatasetKind::Synthetic(SyntheticKind::Blobs),
        _ => DatasetKind::Synthetic(SyntheticKind::Spirals),
    };
    let mut e2e = RunConfig::new(Mode::EndToEnd, arch, kind);
    e2e.epochs = epochs;
    e2e.seed = std::env::var("SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(3);
    if kind == DatasetKind::Mnist {
        e2e.dataset.data_dir = Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist-1k"));
    }
    let mut rep = e2e.clone();
    rep.mode = Mode::Replacement;

    let (train_set, test_set) = load_data(&e2e.dataset)?;
    println!("{dataset}: {} train / {} test, {arch}, {epochs} epochs", train_set.len(), test_set.len());
    let t = Instant::now();
    let (a, _) = run_training::<f32>(&e2e, &train_set, &test_set)?;
    let (b, net) = run_training::<f32>(&rep, &train_set, &test_set)?;
    println!("{}", Comparison::new(&a, &b).to_text());
    for &i in net.plan().frozen() {
        let (ai, bi) = net.coupling(i).expect("frozen");
        println!("stage {i}: a = {ai:.4}, b = {bi:.4}");
    }
    println!("elapsed {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
