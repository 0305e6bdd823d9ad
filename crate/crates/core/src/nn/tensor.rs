//! Dense row-major real tensors, generic over f32/f64.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Scalar types the stack runs on.
pub trait Scalar:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn erf(self) -> Self;
    fn is_finite_s(self) -> bool;
    fn max_s(self, other: Self) -> Self;
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn ln(self) -> Self {
        f32::ln(self)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn erf(self) -> Self {
        libm::erff(self)
    }
    fn is_finite_s(self) -> bool {
        self.is_finite()
    }
    fn max_s(self, other: Self) -> Self {
        self.max(other)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn erf(self) -> Self {
        libm::erf(self)
    }
    fn is_finite_s(self) -> bool {
        self.is_finite()
    }
    fn max_s(self, other: Self) -> Self {
        self.max(other)
    }
}

/// Dense row-major tensor. Most of the stack works on 2-D shapes
/// `(rows, cols)`; scalars are `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let count: usize = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![T::ZERO; count] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/value count mismatch");
        Self { shape: shape.to_vec(), data }
    }

    pub fn scalar(v: T) -> Self {
        Self { shape: vec![1, 1], data: vec![v] }
    }

    pub fn randn(shape: &[usize], std: f64, rng: &mut impl Rng) -> Self {
        let count: usize = shape.iter().product();
        let data = (0..count)
            .map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                T::from_f64(v * std)
            })
            .collect();
        Self { shape: shape.to_vec(), data }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn map_to<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite_s())
    }
}

// Matmul kernels shared by forward and backward passes. Loop orders keep
// the innermost stride contiguous so the compiler vectorizes them.

/// C += A (n×k) · B (k×m)
pub(crate) fn matmul_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * m..(i + 1) * m];
        for (q, &aq) in arow.iter().enumerate() {
            if aq.to_f64() == 0.0 {
                continue;
            }
            let brow = &b[q * m..(q + 1) * m];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aq * bv;
            }
        }
    }
}

/// C += A (n×k) · Bᵀ where B is (m×k)
pub(crate) fn matmul_transb_acc<T: Scalar>(
    a: &[T],
    b: &[T],
    c: &mut [T],
    n: usize,
    k: usize,
    m: usize,
) {
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = T::ZERO;
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            c[i * m + j] += acc;
        }
    }
}

/// C += Aᵀ · B where A is (n×k), B is (n×m), C is (k×m)
pub(crate) fn matmul_transa_acc<T: Scalar>(
    a: &[T],
    b: &[T],
    c: &mut [T],
    n: usize,
    k: usize,
    m: usize,
) {
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * m..(i + 1) * m];
        for (q, &aq) in arow.iter().enumerate() {
            if aq.to_f64() == 0.0 {
                continue;
            }
            let crow = &mut c[q * m..(q + 1) * m];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aq * bv;
            }
        }
    }
}
