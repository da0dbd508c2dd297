use crate::error::{Error, Result};
use crate::tensor::{dot, Element, Tensor};

/// Mean softmax cross-entropy over a `[batch, classes]` logit matrix and the
/// exact gradient `(softmax − onehot) / batch`.
pub fn softmax_xent<E: Element>(logits: &Tensor<E>, labels: &[usize]) -> Result<(E, Tensor<E>)> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() || labels.is_empty() {
        return Err(Error::layer(
            "softmax_xent",
            format!(
                "expected [batch, classes] logits for {} labels, got {:?}",
                labels.len(),
                logits.shape()
            ),
        ));
    }
    let (batch, classes) = (logits.shape()[0], logits.shape()[1]);
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let inv_batch = E::one() / E::of(batch as f64);
    let mut grad = vec![E::zero(); logits.len()];
    let mut total = E::zero();
    for (r, &label) in labels.iter().enumerate() {
        let row = &logits.data()[r * classes..(r + 1) * classes];
        let max = row.iter().fold(E::neg_infinity(), |m, &v| m.max(v));
        let z = row.iter().fold(E::zero(), |a, &v| a + (v - max).exp());
        let log_z = max + z.ln();
        total += log_z - row[label];
        for c in 0..classes {
            let p = (row[c] - log_z).exp();
            let onehot = if c == label { E::one() } else { E::zero() };
            grad[r * classes + c] = (p - onehot) * inv_batch;
        }
    }
    Ok((total * inv_batch, Tensor::from_parts(logits.shape().to_vec(), grad)))
}

/// `L = Σ w ⊙ output`; its gradient is `w`.
pub fn linear_functional<E: Element>(output: &Tensor<E>, weights: &Tensor<E>) -> Result<(E, Tensor<E>)> {
    Ok((dot(weights, output)?, weights.clone()))
}

/// The scalar objective at the end of the network.
#[derive(Debug, Clone)]
pub enum Objective<E: Element> {
    SoftmaxXent(Vec<usize>),
    /// A fixed linear functional of the network output, used by gradient checks.
    Linear(Tensor<E>),
}

impl<E: Element> Objective<E> {
    pub fn evaluate(&self, output: &Tensor<E>) -> Result<(E, Tensor<E>)> {
        match self {
            Objective::SoftmaxXent(labels) => softmax_xent(output, labels),
            Objective::Linear(w) => linear_functional(output, w),
        }
    }
}
