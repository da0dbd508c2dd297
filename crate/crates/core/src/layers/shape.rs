//! Parameter-free layers: ReLU, pooling, and reductions.

use crate::tensor::{Element, Tensor};

pub(super) fn relu_forward<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    x.map(|v| if v > E::zero() { v } else { E::zero() })
}

/// Gradient passes where the input was strictly positive.
pub(super) fn relu_backward<E: Element>(x: &Tensor<E>, g: &Tensor<E>) -> Tensor<E> {
    let data = x
        .data()
        .iter()
        .zip(g.data())
        .map(|(&xi, &gi)| if xi > E::zero() { gi } else { E::zero() })
        .collect();
    Tensor::from_parts(x.shape().to_vec(), data)
}

fn planes<E: Element>(x: &Tensor<E>) -> (usize, usize, usize) {
    let r = x.rank();
    let (h, w) = (x.shape()[r - 2], x.shape()[r - 1]);
    (x.len() / (h * w), h, w)
}

pub(super) fn pool_forward<E: Element>(x: &Tensor<E>, f: usize, out_shape: Vec<usize>) -> Tensor<E> {
    let (n, h, w) = planes(x);
    let (oh, ow) = (h / f, w / f);
    let inv = E::one() / E::of((f * f) as f64);
    let mut y = vec![E::zero(); n * oh * ow];
    for p in 0..n {
        for i in 0..h {
            for j in 0..w {
                y[(p * oh + i / f) * ow + j / f] += x.data()[(p * h + i) * w + j];
            }
        }
    }
    y.iter_mut().for_each(|v| *v *= inv);
    Tensor::from_parts(out_shape, y)
}

pub(super) fn pool_backward<E: Element>(x: &Tensor<E>, f: usize, g: &Tensor<E>) -> Tensor<E> {
    let (n, h, w) = planes(x);
    let (oh, ow) = (h / f, w / f);
    let inv = E::one() / E::of((f * f) as f64);
    let mut gx = vec![E::zero(); x.len()];
    for p in 0..n {
        for i in 0..h {
            for j in 0..w {
                gx[(p * h + i) * w + j] = g.data()[(p * oh + i / f) * ow + j / f] * inv;
            }
        }
    }
    Tensor::from_parts(x.shape().to_vec(), gx)
}

/// `[B, C, H, W] -> [B, C]`.
pub(super) fn spatial_mean_forward<E: Element>(x: &Tensor<E>, out_shape: Vec<usize>) -> Tensor<E> {
    let (n, h, w) = planes(x);
    let area = h * w;
    let inv = E::one() / E::of(area as f64);
    let y = (0..n)
        .map(|p| {
            x.data()[p * area..(p + 1) * area]
                .iter()
                .fold(E::zero(), |a, &v| a + v)
                * inv
        })
        .collect();
    Tensor::from_parts(out_shape, y)
}

pub(super) fn spatial_mean_backward<E: Element>(x: &Tensor<E>, g: &Tensor<E>) -> Tensor<E> {
    let (n, h, w) = planes(x);
    let area = h * w;
    let inv = E::one() / E::of(area as f64);
    let mut gx = Vec::with_capacity(x.len());
    for p in 0..n {
        gx.extend(std::iter::repeat_n(g.data()[p] * inv, area));
    }
    Tensor::from_parts(x.shape().to_vec(), gx)
}

/// `[B, T, d] -> [B, d]`.
pub(super) fn token_mean_forward<E: Element>(x: &Tensor<E>, out_shape: Vec<usize>) -> Tensor<E> {
    let (b, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let inv = E::one() / E::of(t as f64);
    let mut y = vec![E::zero(); b * d];
    for s in 0..b {
        for i in 0..t {
            for j in 0..d {
                y[s * d + j] += x.data()[(s * t + i) * d + j];
            }
        }
    }
    y.iter_mut().for_each(|v| *v *= inv);
    Tensor::from_parts(out_shape, y)
}

pub(super) fn token_mean_backward<E: Element>(x: &Tensor<E>, g: &Tensor<E>) -> Tensor<E> {
    let (b, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let inv = E::one() / E::of(t as f64);
    let mut gx = vec![E::zero(); x.len()];
    for s in 0..b {
        for i in 0..t {
            for j in 0..d {
                gx[(s * t + i) * d + j] = g.data()[s * d + j] * inv;
            }
        }
    }
    Tensor::from_parts(x.shape().to_vec(), gx)
}
