use super::Cache;
use crate::tensor::{Element, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

pub(super) fn forward<E: Element>(
    x: &Tensor<E>,
    gain: &Tensor<E>,
    bias: &Tensor<E>,
) -> (Tensor<E>, Cache<E>) {
    let (rows, d) = x.rows();
    let eps = E::of(LAYER_NORM_EPS);
    let inv_d = E::one() / E::of(d as f64);
    let mut xhat = vec![E::zero(); x.len()];
    let mut y = vec![E::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x.data()[r * d..(r + 1) * d];
        let mean = row.iter().fold(E::zero(), |a, &v| a + v) * inv_d;
        let var = row
            .iter()
            .fold(E::zero(), |a, &v| a + (v - mean) * (v - mean))
            * inv_d;
        let rstd = E::one() / (var + eps).sqrt();
        inv_std.push(rstd);
        for j in 0..d {
            let h = (row[j] - mean) * rstd;
            xhat[r * d + j] = h;
            y[r * d + j] = gain.data()[j] * h + bias.data()[j];
        }
    }
    let shape = x.shape().to_vec();
    (
        Tensor::from_parts(shape.clone(), y),
        Cache::LayerNorm {
            normalized: Tensor::from_parts(shape, xhat),
            inv_std,
        },
    )
}

pub(super) fn backward<E: Element>(
    xhat: &Tensor<E>,
    inv_std: &[E],
    gain: &Tensor<E>,
    g: &Tensor<E>,
) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
    let (rows, d) = xhat.rows();
    let inv_d = E::one() / E::of(d as f64);
    let mut gx = vec![E::zero(); xhat.len()];
    let mut ggain = vec![E::zero(); d];
    let mut gbias = vec![E::zero(); d];
    let mut gh = vec![E::zero(); d];
    for r in 0..rows {
        let hrow = &xhat.data()[r * d..(r + 1) * d];
        let grow = &g.data()[r * d..(r + 1) * d];
        let mut sum_gh = E::zero();
        let mut sum_ghh = E::zero();
        for j in 0..d {
            ggain[j] += grow[j] * hrow[j];
            gbias[j] += grow[j];
            gh[j] = grow[j] * gain.data()[j];
            sum_gh += gh[j];
            sum_ghh += gh[j] * hrow[j];
        }
        for j in 0..d {
            gx[r * d + j] = inv_std[r] * (gh[j] - inv_d * sum_gh - hrow[j] * inv_d * sum_ghh);
        }
    }
    (
        Tensor::from_parts(xhat.shape().to_vec(), gx),
        Tensor::from_parts(vec![d], ggain),
        Tensor::from_parts(vec![d], gbias),
    )
}
