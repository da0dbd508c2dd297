use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::{Element, Tensor};
use crate::training::forward;

/// Linear CKA between stage outputs `h₁..h_L`. `None` marks a pair where
/// either activation matrix has no variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Vec<Vec<Option<f64>>>,
}

impl SimilarityMatrix {
    /// Number of stages.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CKA between stages `i` and `j`, 1-based.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i - 1][j - 1]
    }

    /// The stage most similar to `i`, excluding `i` itself.
    pub fn most_similar(&self, i: usize) -> Option<usize> {
        (1..=self.len())
            .filter(|&j| j != i)
            .filter_map(|j| self.get(i, j).map(|v| (j, v)))
            .fold(None, |best: Option<(usize, f64)>, (j, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((j, v)),
            })
            .map(|(j, _)| j)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                if let (Some(a), Some(b)) = (self.get(i, j), self.get(j, i)) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// CSV with a header row and column of stage indices; undefined cells are empty.
    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut s = String::from("stage");
        for j in 1..=n {
            s.push_str(&format!(",{j}"));
        }
        s.push('\n');
        for i in 1..=n {
            s.push_str(&i.to_string());
            for j in 1..=n {
                s.push(',');
                if let Some(v) = self.get(i, j) {
                    s.push_str(&format!("{v:.9}"));
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Centred Gram matrix `H X Xᵀ H` of `n` rows, with its Frobenius norm
/// (zero when the rows carry no variance).
fn centred_gram(x: &[f64], n: usize) -> (Vec<f64>, f64) {
    let p = x.len() / n;
    let mut k = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v: f64 = x[a * p..(a + 1) * p].iter().zip(&x[b * p..(b + 1) * p]).map(|(u, w)| u * w).sum();
            k[a * n + b] = v;
            k[b * n + a] = v;
        }
    }
    let raw_norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    let row_mean: Vec<f64> = (0..n).map(|a| k[a * n..(a + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let all_mean = row_mean.iter().sum::<f64>() / n as f64;
    for a in 0..n {
        for b in 0..n {
            k[a * n + b] += all_mean - row_mean[a] - row_mean[b];
        }
    }
    let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Centring a constant matrix leaves only rounding noise.
    let norm = if norm <= 1e-12 * raw_norm { 0.0 } else { norm };
    (k, norm)
}

fn cka_from_grams(k: &(Vec<f64>, f64), l: &(Vec<f64>, f64)) -> Option<f64> {
    if k.1 == 0.0 || l.1 == 0.0 {
        return None;
    }
    let inner: f64 = k.0.iter().zip(&l.0).map(|(a, b)| a * b).sum();
    Some((inner / (k.1 * l.1)).clamp(0.0, 1.0))
}

/// Linear CKA of two activation matrices with rows as samples.
pub fn linear_cka(x: &Tensor<f64>, y: &Tensor<f64>) -> Result<Option<f64>> {
    let n = x.shape()[0];
    if y.shape()[0] != n {
        return Err(Error::ShapeMismatch {
            op: "linear_cka",
            left: x.shape().to_vec(),
            right: y.shape().to_vec(),
        });
    }
    Ok(cka_from_grams(&centred_gram(x.data(), n), &centred_gram(y.data(), n)))
}

pub fn cka_matrix<E: Element>(net: &Network<E>, probe: &Tensor<E>) -> Result<SimilarityMatrix> {
    let n = probe.shape()[0];
    if n < 8 {
        return Err(Error::Invalid(format!("CKA needs at least 8 probe samples, got {n}")));
    }
    let trace = forward(net, probe)?;
    let grams: Vec<(Vec<f64>, f64)> = trace
        .stages
        .iter()
        .map(|s| {
            let data = s.output.to_f64_vec();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidTensor("non-finite activations".into()));
            }
            Ok(centred_gram(&data, n))
        })
        .collect::<Result<_>>()?;
    let l = grams.len();
    let mut values = vec![vec![None; l]; l];
    for i in 0..l {
        for j in i..l {
            let v = cka_from_grams(&grams[i], &grams[j]);
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(SimilarityMatrix { values })
}
