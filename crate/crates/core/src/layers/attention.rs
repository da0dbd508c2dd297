//! Single-head scaled dot-product self-attention over `[.., T, d]` inputs:
//! `Y = softmax(X Wq (X Wk)ᵀ / √d) (X Wv) Wo`, applied per sample.

use super::Cache;
use crate::tensor::{gemm, Element, Tensor};

/// `a [m×p] · b [p×q]`.
fn mm<E: Element>(a: &[E], b: &[E], m: usize, p: usize, q: usize) -> Vec<E> {
    let mut out = vec![E::zero(); m * q];
    gemm(a, b, &mut out, m, p, q);
    out
}

/// `aᵀ · b` for `a [p×m]`, `b [p×q]`, accumulated into `out [m×q]`.
fn mm_tn_acc<E: Element>(a: &[E], b: &[E], out: &mut [E], p: usize, m: usize, q: usize) {
    for k in 0..p {
        let brow = &b[k * q..(k + 1) * q];
        for i in 0..m {
            let aki = a[k * m + i];
            let row = &mut out[i * q..(i + 1) * q];
            for (o, &bkj) in row.iter_mut().zip(brow) {
                *o += aki * bkj;
            }
        }
    }
}

/// `a · bᵀ` for `a [m×p]`, `b [q×p]`.
fn mm_nt<E: Element>(a: &[E], b: &[E], m: usize, p: usize, q: usize) -> Vec<E> {
    let mut out = vec![E::zero(); m * q];
    for i in 0..m {
        let arow = &a[i * p..(i + 1) * p];
        for j in 0..q {
            let brow = &b[j * p..(j + 1) * p];
            let mut acc = E::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            out[i * q + j] = acc;
        }
    }
    out
}

fn dims<E: Element>(x: &Tensor<E>) -> (usize, usize, usize) {
    let r = x.rank();
    let (t, d) = (x.shape()[r - 2], x.shape()[r - 1]);
    (x.len() / (t * d), t, d)
}

pub(super) fn forward<E: Element>(
    x: &Tensor<E>,
    wq: &Tensor<E>,
    wk: &Tensor<E>,
    wv: &Tensor<E>,
    wo: &Tensor<E>,
) -> (Tensor<E>, Cache<E>) {
    let (samples, t, d) = dims(x);
    let scale = E::one() / E::of(d as f64).sqrt();
    let n = t * d;
    let mut q_all = Vec::with_capacity(samples * n);
    let mut k_all = Vec::with_capacity(samples * n);
    let mut v_all = Vec::with_capacity(samples * n);
    let mut a_all = Vec::with_capacity(samples * t * t);
    let mut c_all = Vec::with_capacity(samples * n);
    let mut y_all = Vec::with_capacity(samples * n);
    for s in 0..samples {
        let xs = &x.data()[s * n..(s + 1) * n];
        let q = mm(xs, wq.data(), t, d, d);
        let k = mm(xs, wk.data(), t, d, d);
        let v = mm(xs, wv.data(), t, d, d);
        let mut a = mm_nt(&q, &k, t, d, t);
        for row in a.chunks_mut(t) {
            let max = row
                .iter()
                .fold(E::neg_infinity(), |m, &v| if v * scale > m { v * scale } else { m });
            let mut z = E::zero();
            for v in row.iter_mut() {
                *v = (*v * scale - max).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        let c = mm(&a, &v, t, t, d);
        let y = mm(&c, wo.data(), t, d, d);
        q_all.extend(q);
        k_all.extend(k);
        v_all.extend(v);
        a_all.extend(a);
        c_all.extend(c);
        y_all.extend(y);
    }
    let shape = x.shape().to_vec();
    let mut a_shape = shape.clone();
    let r = a_shape.len();
    a_shape[r - 1] = t;
    let cache = Cache::Attention {
        query: Tensor::from_parts(shape.clone(), q_all),
        key: Tensor::from_parts(shape.clone(), k_all),
        value: Tensor::from_parts(shape.clone(), v_all),
        weights: Tensor::from_parts(a_shape, a_all),
        context: Tensor::from_parts(shape.clone(), c_all),
    };
    (Tensor::from_parts(shape, y_all), cache)
}

pub(super) struct Saved<'a, E: Element> {
    pub query: &'a Tensor<E>,
    pub key: &'a Tensor<E>,
    pub value: &'a Tensor<E>,
    pub weights: &'a Tensor<E>,
    pub context: &'a Tensor<E>,
}

pub(super) fn backward<E: Element>(
    x: &Tensor<E>,
    [wq, wk, wv, wo]: [&Tensor<E>; 4],
    saved: Saved<'_, E>,
    g: &Tensor<E>,
) -> (Tensor<E>, Vec<Tensor<E>>) {
    let (samples, t, d) = dims(x);
    let scale = E::one() / E::of(d as f64).sqrt();
    let n = t * d;
    let mut gx = vec![E::zero(); x.len()];
    let mut gwq = vec![E::zero(); d * d];
    let mut gwk = vec![E::zero(); d * d];
    let mut gwv = vec![E::zero(); d * d];
    let mut gwo = vec![E::zero(); d * d];
    for s in 0..samples {
        let sl = |t_: &'_ Tensor<E>| -> Vec<E> { t_.data()[s * n..(s + 1) * n].to_vec() };
        let xs = sl(x);
        let (q, k, v, c) = (sl(saved.query), sl(saved.key), sl(saved.value), sl(saved.context));
        let a = &saved.weights.data()[s * t * t..(s + 1) * t * t];
        let gy = &g.data()[s * n..(s + 1) * n];

        mm_tn_acc(&c, gy, &mut gwo, t, d, d);
        let gc = mm_nt(gy, wo.data(), t, d, d);
        let ga = mm_nt(&gc, &v, t, d, t);
        let mut gv = vec![E::zero(); n];
        mm_tn_acc(a, &gc, &mut gv, t, t, d);

        let mut gs = vec![E::zero(); t * t];
        for i in 0..t {
            let arow = &a[i * t..(i + 1) * t];
            let grow = &ga[i * t..(i + 1) * t];
            let inner = arow
                .iter()
                .zip(grow)
                .fold(E::zero(), |acc, (&p, &q)| acc + p * q);
            for j in 0..t {
                gs[i * t + j] = arow[j] * (grow[j] - inner) * scale;
            }
        }
        let gq = mm(&gs, &k, t, t, d);
        let mut gk = vec![E::zero(); n];
        mm_tn_acc(&gs, &q, &mut gk, t, t, d);

        mm_tn_acc(&xs, &gq, &mut gwq, t, d, d);
        mm_tn_acc(&xs, &gk, &mut gwk, t, d, d);
        mm_tn_acc(&xs, &gv, &mut gwv, t, d, d);

        let gxs = &mut gx[s * n..(s + 1) * n];
        for (grad, w) in [(&gq, wq), (&gk, wk), (&gv, wv)] {
            let part = mm_nt(grad, w.data(), t, d, d);
            for (o, p) in gxs.iter_mut().zip(part) {
                *o += p;
            }
        }
    }
    let wshape = vec![d, d];
    (
        Tensor::from_parts(x.shape().to_vec(), gx),
        vec![
            Tensor::from_parts(wshape.clone(), gwq),
            Tensor::from_parts(wshape.clone(), gwk),
            Tensor::from_parts(wshape.clone(), gwv),
            Tensor::from_parts(wshape, gwo),
        ],
    )
}
