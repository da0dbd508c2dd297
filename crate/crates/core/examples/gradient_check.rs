//! Checks analytic gradients against central differences on a few small
//! networks in both training modes.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replearn::gradcheck::{check_network, NETWORK_TOL};
use replearn::layers::Objective;
use replearn::network::{parse_architecture, Network};
use replearn::Tensor;

fn main() -> replearn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (spec, sample) in [
        ("mlp-5x6", vec![3]),
        ("convnet-4x3", vec![1, 4, 4]),
        ("tiny-vit-4x4", vec![3]),
    ] {
        for k in [None, Some(2), Some(4)] {
            let arch = parse_architecture(spec, &sample, 3)?;
            let mut net = match k {
                None => Network::<f64>::end_to_end(arch, 5),
                Some(k) => Network::replacement(arch, k, (0.6, 0.3), 5)?,
            };
            net.jitter(9, 0.05);
            let mut shape = vec![2];
            shape.extend_from_slice(&sample);
            let n: usize = shape.iter().product();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let x = Tensor::from_f64(&shape, &x)?;
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let objective = Objective::Linear(Tensor::from_f64(&[2, 3], &w)?);
            let report = check_network(&mut net, &x, &objective, NETWORK_TOL)?;
            println!(
                "{spec:<13} {:<12} {:>5} quantities  max rel err {:.2e}  {}",
                k.map_or("e2e".to_string(), |k| format!("k={k}")),
                report.records.len(),
                report.max_rel_err,
                if report.passed { "ok" } else { "FAIL" }
            );
        }
    }
    Ok(())
}
