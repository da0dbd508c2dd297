//! Direct 3×3 convolution, stride 1, zero padding 1 (spatial shape preserved).

use crate::tensor::{Element, Tensor};

/// Valid output range along one axis for tap offset `d ∈ {-1, 0, 1}`.
#[inline]
fn span(len: usize, d: isize) -> (usize, usize) {
    match d {
        -1 => (1, len),
        1 => (0, len.saturating_sub(1)),
        _ => (0, len),
    }
}

pub(super) fn forward<E: Element>(
    x: &Tensor<E>,
    weight: &Tensor<E>,
    bias: &Tensor<E>,
    out_shape: Vec<usize>,
) -> Tensor<E> {
    let (batch, cin, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let cout = out_shape[1];
    let plane = h * w;
    let (xd, wd, bd) = (x.data(), weight.data(), bias.data());
    let mut y = vec![E::zero(); batch * cout * plane];
    for b in 0..batch {
        for o in 0..cout {
            let out = &mut y[(b * cout + o) * plane..(b * cout + o + 1) * plane];
            out.iter_mut().for_each(|v| *v = bd[o]);
            for c in 0..cin {
                let src = &xd[(b * cin + c) * plane..(b * cin + c + 1) * plane];
                for kh in 0..3 {
                    let dh = kh as isize - 1;
                    let (h0, h1) = span(h, dh);
                    for kw in 0..3 {
                        let dw = kw as isize - 1;
                        let (w0, w1) = span(w, dw);
                        let wv = wd[((o * cin + c) * 3 + kh) * 3 + kw];
                        for i in h0..h1 {
                            let si = (i as isize + dh) as usize;
                            let orow = &mut out[i * w..(i + 1) * w];
                            let srow = &src[si * w..(si + 1) * w];
                            for j in w0..w1 {
                                orow[j] += wv * srow[(j as isize + dw) as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_parts(out_shape, y)
}

pub(super) fn backward<E: Element>(
    x: &Tensor<E>,
    weight: &Tensor<E>,
    g: &Tensor<E>,
) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
    let (batch, cin, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let cout = weight.shape()[0];
    let plane = h * w;
    let (xd, wd, gd) = (x.data(), weight.data(), g.data());
    let mut gx = vec![E::zero(); xd.len()];
    let mut gw = vec![E::zero(); wd.len()];
    let mut gb = vec![E::zero(); cout];
    for b in 0..batch {
        for o in 0..cout {
            let gout = &gd[(b * cout + o) * plane..(b * cout + o + 1) * plane];
            gb[o] += gout.iter().fold(E::zero(), |acc, &v| acc + v);
            for c in 0..cin {
                let base = (b * cin + c) * plane;
                for kh in 0..3 {
                    let dh = kh as isize - 1;
                    let (h0, h1) = span(h, dh);
                    for kw in 0..3 {
                        let dw = kw as isize - 1;
                        let (w0, w1) = span(w, dw);
                        let widx = ((o * cin + c) * 3 + kh) * 3 + kw;
                        let wv = wd[widx];
                        let mut acc = E::zero();
                        for i in h0..h1 {
                            let si = (i as isize + dh) as usize;
                            let grow = &gout[i * w..(i + 1) * w];
                            for j in w0..w1 {
                                let sidx = base + si * w + (j as isize + dw) as usize;
                                acc += grow[j] * xd[sidx];
                                gx[sidx] += wv * grow[j];
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    (
        Tensor::from_parts(x.shape().to_vec(), gx),
        Tensor::from_parts(weight.shape().to_vec(), gw),
        Tensor::from_parts(vec![cout], gb),
    )
}
