use crate::tensor::{Element, Tensor};

/// `y = x Wᵀ + b` applied to every row of `x`.
pub(super) fn forward<E: Element>(
    x: &Tensor<E>,
    weight: &Tensor<E>,
    bias: &Tensor<E>,
    out_shape: Vec<usize>,
) -> Tensor<E> {
    let (rows, inputs) = x.rows();
    let outputs = bias.len();
    let (xd, wd, bd) = (x.data(), weight.data(), bias.data());
    let mut y = vec![E::zero(); rows * outputs];
    for r in 0..rows {
        let xr = &xd[r * inputs..(r + 1) * inputs];
        for o in 0..outputs {
            let wo = &wd[o * inputs..(o + 1) * inputs];
            let mut acc = bd[o];
            for (&a, &b) in xr.iter().zip(wo) {
                acc += a * b;
            }
            y[r * outputs + o] = acc;
        }
    }
    Tensor::from_parts(out_shape, y)
}

pub(super) fn backward<E: Element>(
    x: &Tensor<E>,
    weight: &Tensor<E>,
    g: &Tensor<E>,
) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
    let (rows, inputs) = x.rows();
    let outputs = weight.shape()[0];
    let (xd, wd, gd) = (x.data(), weight.data(), g.data());
    let mut gx = vec![E::zero(); rows * inputs];
    let mut gw = vec![E::zero(); outputs * inputs];
    let mut gb = vec![E::zero(); outputs];
    for r in 0..rows {
        let xr = &xd[r * inputs..(r + 1) * inputs];
        let gxr = &mut gx[r * inputs..(r + 1) * inputs];
        for o in 0..outputs {
            let go = gd[r * outputs + o];
            gb[o] += go;
            let wo = &wd[o * inputs..(o + 1) * inputs];
            let gwo = &mut gw[o * inputs..(o + 1) * inputs];
            for i in 0..inputs {
                gwo[i] += go * xr[i];
                gxr[i] += go * wo[i];
            }
        }
    }
    (
        Tensor::from_parts(x.shape().to_vec(), gx),
        Tensor::from_parts(weight.shape().to_vec(), gw),
        Tensor::from_parts(vec![outputs], gb),
    )
}
