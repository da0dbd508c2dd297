use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layers::Layer;
use crate::network::{Architecture, Network};
use crate::tensor::{Element, Tensor};
use crate::training::{correct, forward, train_step, OptimizerConfig, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            optimizer: OptimizerConfig {
                weight_decay: 0.0,
                ..OptimizerConfig::default()
            },
            seed: 0,
        }
    }
}

/// Flattened activations `h_layer` for every sample, `[N, features]`.
/// Layer 0 is the stem output.
pub fn stage_features<E: Element>(net: &Network<E>, data: &Dataset, layer: usize) -> Result<Tensor<f64>> {
    if layer > net.depth() {
        return Err(Error::Invalid(format!("layer {layer} out of range 0..={}", net.depth())));
    }
    let mut rows = Vec::new();
    let mut width = 0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(256) {
        let (x, _) = data.batch::<E>(chunk);
        let trace = forward(net, &x)?;
        let h = trace.activations().nth(layer).expect("range checked");
        width = h.len() / chunk.len();
        rows.extend(h.to_f64_vec());
    }
    Tensor::new(vec![data.len(), width], rows)
}

fn standardize(train: &mut [f64], test: &mut [f64], width: usize) {
    let n = (train.len() / width).max(1) as f64;
    for f in 0..width {
        let mean = train.iter().skip(f).step_by(width).sum::<f64>() / n;
        let var = train.iter().skip(f).step_by(width).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in train.iter_mut().skip(f).step_by(width) {
            *v = (*v - mean) / sd;
        }
        for v in test.iter_mut().skip(f).step_by(width) {
            *v = (*v - mean) / sd;
        }
    }
}

/// Test accuracy of a softmax linear classifier trained on standardized
/// activations of stage `layer` (1-based; 0 probes the stem output).
pub fn linear_probe<E: Element>(
    net: &Network<E>,
    train: &Dataset,
    test: &Dataset,
    layer: usize,
    cfg: &ProbeConfig,
) -> Result<f64> {
    let ftrain = stage_features(net, train, layer)?;
    let ftest = stage_features(net, test, layer)?;
    let width = ftrain.shape()[1];
    let (mut xtr, mut xte) = (ftrain.into_data(), ftest.into_data());
    standardize(&mut xtr, &mut xte, width);
    let classes = train.classes();
    let arch = Architecture::new(&[width], classes, vec![], vec![], vec![Layer::dense(width, classes)])?;
    let mut clf = Network::<f64>::end_to_end(arch, cfg.seed);
    let mut opt = OptimizerState::new(cfg.optimizer, &clf);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let gather = |x: &[f64], idx: &[usize]| -> Tensor<f64> {
        let data = idx.iter().flat_map(|&i| x[i * width..(i + 1) * width].iter().copied()).collect();
        Tensor::new(vec![idx.len(), width], data).expect("consistent")
    };
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels()[i]).collect();
            train_step(&mut clf, &mut opt, &gather(&xtr, chunk), &labels, cfg.optimizer.lr)?;
        }
    }
    let all: Vec<usize> = (0..test.len()).collect();
    let logits = forward(&clf, &gather(&xte, &all))?;
    let hits = correct(logits.output(), test.labels());
    Ok(hits as f64 / test.len().max(1) as f64)
}
