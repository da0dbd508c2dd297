//! Generates synthetic data, loads the bundled MNIST subset and subsets it.
//!
//! ```text
//! cargo run --example datasets -- /tmp/spirals
//! ```

use std::path::{Path, PathBuf};

use replearn::data::{load_idx, make_synthetic, SyntheticKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from);

    for kind in [SyntheticKind::Blobs, SyntheticKind::Spirals] {
        let data = make_synthetic(kind, 600, 3, 0.05, 0)?;
        let (train, test) = data.train_test_split(0.2, 0);
        println!("{kind}: {} train, {} test, shape {:?}", train.len(), test.len(), train.sample_shape());
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            train.write_csv(&dir.join(format!("{kind}-train.csv")))?;
            test.write_csv(&dir.join(format!("{kind}-test.csv")))?;
        }
    }

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist-1k");
    let mnist = load_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?;
    println!("mnist-1k: {} images of {:?}, {} classes", mnist.len(), mnist.sample_shape(), mnist.classes());
    let small = mnist.balanced(50, 0);
    let mut per_class = vec![0; small.classes()];
    for &l in small.labels() {
        per_class[l] += 1;
    }
    println!("balanced(50): per class {per_class:?}");
    Ok(())
}
