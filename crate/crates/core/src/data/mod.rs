//! Datasets: IDX (MNIST) and CIFAR-10 binary loaders, synthetic generators,
//! and reproducible subsets. Inputs are always scaled into `[0, 1]`.

mod formats;
mod synthetic;

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

pub use formats::{load_cifar10, load_idx};
pub use synthetic::{make_synthetic, SyntheticKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Labelled samples stored as `[N, sample_shape..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Tensor<f64>,
    labels: Vec<usize>,
    classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(inputs: Tensor<f64>, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if inputs.rank() < 2 || inputs.shape()[0] != labels.len() {
            return Err(Error::CountMismatch {
                images: inputs.shape().first().copied().unwrap_or(0),
                labels: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        if inputs.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidTensor("dataset inputs must lie in [0, 1]".into()));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &Tensor<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.inputs.shape()[1..]
    }

    fn sample_len(&self) -> usize {
        self.sample_shape().iter().product()
    }

    /// Samples at `indices`, in that order, cast to `E`. Panics on an index
    /// past the end.
    pub fn batch<E: Element>(&self, indices: &[usize]) -> (Tensor<E>, Vec<usize>) {
        let n = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend(self.inputs.data()[i * n..(i + 1) * n].iter().map(|&v| E::of(v)));
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.sample_shape());
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (Tensor::from_parts(shape, data), labels)
    }

    /// A new dataset holding the samples at `indices`.
    pub fn select(&self, indices: &[usize]) -> Self {
        let (inputs, labels) = self.batch::<f64>(indices);
        Self {
            inputs,
            labels,
            classes: self.classes,
            split: self.split,
        }
    }

    /// The first `n` samples (all of them if fewer).
    pub fn first(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// Up to `n` samples with classes as even as the data allows, chosen by a
    /// seeded shuffle and returned interleaved by class.
    pub fn balanced(&self, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.classes];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        for c in &mut by_class {
            c.shuffle(&mut rng);
        }
        let mut picked = Vec::with_capacity(n);
        let mut round = 0;
        while picked.len() < n.min(self.len()) {
            for c in &by_class {
                if picked.len() < n {
                    if let Some(&i) = c.get(round) {
                        picked.push(i);
                    }
                }
            }
            round += 1;
        }
        self.select(&picked)
    }

    /// Seeded shuffle, then the last `test_fraction` of samples become the test split.
    pub fn train_test_split(&self, test_fraction: f64, seed: u64) -> (Self, Self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        let (train, test) = idx.split_at(self.len() - n_test.min(self.len()));
        (
            self.select(train).with_split(Split::Train),
            self.select(test).with_split(Split::Test),
        )
    }

    /// Writes `x0,..,x{n-1},label` rows with a header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let n = self.sample_len();
        let header: Vec<String> = (0..n).map(|j| format!("x{j}")).chain(["label".into()]).collect();
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        for (i, &label) in self.labels.iter().enumerate() {
            let row = &self.inputs.data()[i * n..(i + 1) * n];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.9}")).collect();
            writeln!(out, "{},{label}", cells.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests;
