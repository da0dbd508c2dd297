//! Dense row-major tensors and the handful of kernels the layer zoo is built on.
//!
//! Tensors are values: every operation returns a new tensor. Loop orders are
//! fixed so that results are bit-reproducible across runs. There is no
//! broadcasting; binary operations require identical shapes.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

use crate::error::{Error, Result};

/// Floating-point element type of a tensor (`f32` or `f64`).
pub trait Element:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    const NAME: &'static str;

    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Raw bits widened to `u64`, for hashing and bitwise comparisons.
    fn bits(self) -> u64;
}

impl Element for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn bits(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Element for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn bits(self) -> u64 {
        self.to_bits()
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<E = f64> {
    shape: Vec<usize>,
    data: Vec<E>,
}

impl<E: Element> Debug for Tensor<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidTensor("rank must be at least 1".into()));
    }
    if shape.contains(&0) {
        return Err(Error::InvalidTensor(format!(
            "shape entries must be positive, got {shape:?}"
        )));
    }
    Ok(shape.iter().product())
}

impl<E: Element> Tensor<E> {
    pub fn new(shape: Vec<usize>, data: Vec<E>) -> Result<Self> {
        let n = check_shape(&shape)?;
        if n != data.len() {
            return Err(Error::InvalidTensor(format!(
                "shape {shape:?} holds {n} elements but {} were given",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// Builds a tensor whose shape and length the caller has already checked.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<E>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, E::zero())
    }

    pub fn filled(shape: &[usize], value: E) -> Self {
        let n = check_shape(shape).expect("zeros: invalid shape");
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::new(shape.to_vec(), data.iter().map(|&x| E::of(x)).collect())
    }

    pub fn vector(data: &[f64]) -> Self {
        Self::from_f64(&[data.len()], data).expect("vector: empty data")
    }

    pub fn matrix(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidTensor("ragged matrix rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_f64(&[rows.len(), cols], &flat)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![E::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = E::one();
        }
        Self::from_parts(vec![n, n], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    pub fn get(&self, index: usize) -> E {
        self.data[index]
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|x| x.as_f64()).collect()
    }

    pub fn cast<F: Element>(&self) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| F::of(x.as_f64())).collect(),
        }
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                left: self.shape.clone(),
                right: shape.to_vec(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Copy of `self` with one element replaced.
    pub fn with_element(&self, index: usize, value: E) -> Self {
        let mut data = self.data.clone();
        data[index] = value;
        Self {
            shape: self.shape.clone(),
            data,
        }
    }

    pub fn map(&self, f: impl Fn(E) -> E) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(E, E) -> E) -> Result<Self> {
        self.same_shape(other, op)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn scale(&self, alpha: E) -> Self {
        self.map(|x| alpha * x)
    }

    pub fn sum(&self) -> E {
        self.data.iter().fold(E::zero(), |acc, &x| acc + x)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Rows of a tensor viewed as `[len / last, last]`.
    pub fn rows(&self) -> (usize, usize) {
        let last = *self.shape.last().expect("rank >= 1");
        (self.len() / last, last)
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::InvalidTensor(format!(
                "transpose needs a rank-2 tensor, got {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![E::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Self::from_parts(vec![n, m], out))
    }

    pub(crate) fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }
}

/// Matrix product of a `[m, p]` and a `[p, q]` tensor.
pub fn matmul<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let (m, p, q) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = vec![E::zero(); m * q];
    gemm(&a.data, &b.data, &mut out, m, p, q);
    Ok(Tensor::from_parts(vec![m, q], out))
}

/// `out += a · b` on raw row-major slices, i-k-j loop order.
pub(crate) fn gemm<E: Element>(a: &[E], b: &[E], out: &mut [E], m: usize, p: usize, q: usize) {
    for i in 0..m {
        let row = &mut out[i * q..(i + 1) * q];
        for k in 0..p {
            let aik = a[i * p + k];
            let brow = &b[k * q..(k + 1) * q];
            for (o, &bkj) in row.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
}

/// `alpha · x + y`.
pub fn axpy<E: Element>(alpha: E, x: &Tensor<E>, y: &Tensor<E>) -> Result<Tensor<E>> {
    x.zip_map(y, "axpy", |xi, yi| alpha * xi + yi)
}

/// Full contraction `Σ x ⊙ y`, summed in index order.
pub fn dot<E: Element>(x: &Tensor<E>, y: &Tensor<E>) -> Result<E> {
    x.same_shape(y, "dot")?;
    Ok(x
        .data
        .iter()
        .zip(&y.data)
        .fold(E::zero(), |acc, (&a, &b)| acc + a * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type T = Tensor<f64>;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        T::from_f64(shape, data).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let a = T::matrix(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&a, &T::identity(2)).unwrap(), a);

        let col = t(&[2, 1], &[5.0, 7.0]);
        assert_eq!(matmul(&T::identity(2), &col).unwrap(), col);

        let ones = t(&[2, 1], &[1.0, 1.0]);
        assert_eq!(
            matmul(&a, &ones).unwrap().to_f64_vec(),
            vec![3.0, 7.0]
        );
    }

    #[test]
    fn matmul_rejects_inner_mismatch_naming_both_shapes() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 2], &[0.0; 4]);
        let msg = matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn axpy_examples() {
        let y = T::vector(&[1.0, 2.0]);
        assert_eq!(axpy(0.0, &T::vector(&[9.0, -3.0]), &y).unwrap(), y);
        assert_eq!(
            axpy(1.0, &T::vector(&[1.0, 1.0]), &T::vector(&[0.0, 0.0]))
                .unwrap()
                .to_f64_vec(),
            vec![1.0, 1.0]
        );
        assert_eq!(
            axpy(0.5, &T::vector(&[2.0, 4.0]), &T::vector(&[1.0, 1.0]))
                .unwrap()
                .to_f64_vec(),
            vec![2.0, 3.0]
        );
        assert!(axpy(1.0, &T::vector(&[1.0]), &y).is_err());
    }

    #[test]
    fn dot_examples() {
        assert_eq!(
            dot(&T::vector(&[1.0, 1.0]), &T::vector(&[2.0, 3.0])).unwrap(),
            5.0
        );
        assert_eq!(
            dot(&T::zeros(&[3]), &T::vector(&[4.0, -1.0, 7.5])).unwrap(),
            0.0
        );
        assert_eq!(
            dot(
                &T::vector(&[1.0, 2.0, 3.0]),
                &T::vector(&[3.0, 2.0, 1.0])
            )
            .unwrap(),
            10.0
        );
        assert!(dot(&T::vector(&[1.0]), &T::vector(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn construction_rejects_bad_shapes() {
        assert!(T::new(vec![], vec![]).is_err());
        assert!(T::new(vec![2, 0], vec![]).is_err());
        assert!(T::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn axpy_with_zero_target_is_identity(x in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let x = T::vector(&x);
            prop_assert_eq!(axpy(1.0, &x, &T::zeros(&[x.len()])).unwrap(), x);
        }

        #[test]
        fn dot_is_symmetric_up_to_rounding((x, y) in vec_strategy()) {
            let (x, y) = (T::vector(&x), T::vector(&y));
            let xy = dot(&x, &y).unwrap();
            let yx = dot(&y, &x).unwrap();
            // Elementwise products commute exactly, so the fixed order gives identical sums.
            prop_assert_eq!(xy.to_bits(), yx.to_bits());
        }

        #[test]
        fn matmul_by_identity_is_exact_for_integers(
            m in 1usize..6, n in 1usize..6, seed in prop::collection::vec(-50i32..50, 36)
        ) {
            let data: Vec<f64> = seed.iter().take(m * n).map(|&v| v as f64).collect();
            prop_assume!(data.len() == m * n);
            let a = T::from_f64(&[m, n], &data).unwrap();
            prop_assert_eq!(matmul(&a, &T::identity(n)).unwrap(), a);
        }

        #[test]
        fn kernels_are_deterministic((x, y) in vec_strategy()) {
            let (x, y) = (T::vector(&x), T::vector(&y));
            let n = x.len();
            let a = x.reshape(&[1, n]).unwrap();
            let b = y.reshape(&[n, 1]).unwrap();
            prop_assert_eq!(matmul(&a, &b).unwrap(), matmul(&a, &b).unwrap());
            prop_assert_eq!(axpy(0.3, &x, &y).unwrap(), axpy(0.3, &x, &y).unwrap());
            prop_assert_eq!(dot(&x, &y).unwrap().to_bits(), dot(&x, &y).unwrap().to_bits());
        }
    }
}
