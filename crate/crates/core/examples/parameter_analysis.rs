//! Parameter and compute accounting for replacement learning.
//!
//! ```text
//! cargo run --example parameter_analysis -- mlp-12x32 4
//! ```

use replearn::analysis::{complexity_estimate, param_counts, reduction_bounds};
use replearn::network::{parse_architecture, Network};

fn main() -> replearn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let spec = args.first().map_or("mlp-12x32", String::as_str);
    let k: usize = args.get(1).map_or(4, |s| s.parse().expect("k must be an integer"));

    let net = Network::<f64>::replacement(parse_architecture(spec, &[2], 2)?, k, (0.5, 0.5), 0)?;
    let report = param_counts(&net);
    println!("{report}");
    assert!(report.live_matches());

    println!("reduction bounds for depth 12, stage sizes in [100, 1000]:");
    for k in 2..=5 {
        let b = reduction_bounds(12, k, 100, 1000)?;
        println!("  k={k}: |F|={} exact {:?} asymptotic ({}, {})", b.frozen_count, b.exact, b.asymptotic.0, b.asymptotic.1);
    }

    println!("cost in forward units, depth 12:");
    for k in 1..=11 {
        let c = complexity_estimate(12, k)?;
        println!("  k={k:<2} total {:<6} saved {}", c.total.to_string(), c.reduction);
    }
    Ok(())
}
