//! Dense row-major tensors.
//!
//! Frames, activations, parameters and gradients all share this type.
//! Spatial tensors use `H×W×C` layout; convolution filters are stored as
//! `K×K×Cin×Cout` and dense weights as `M×N`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Floating-point element type. Training runs in `f32`; `f64` exists for
/// gradient checking.
pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
{
    /// Dtype code used by the tensor file format.
    const DTYPE: u8;
    /// Element width in bytes.
    const WIDTH: usize;
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;
    fn powi(self, n: i32) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

macro_rules! impl_scalar {
    ($t:ty, $code:expr) => {
        impl Scalar for $t {
            const DTYPE: u8 = $code;
            const WIDTH: usize = std::mem::size_of::<$t>();
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                <$t>::powi(self, n)
            }
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn read_le(bytes: &[u8]) -> Self {
                let mut buf = [0u8; std::mem::size_of::<$t>()];
                buf.copy_from_slice(bytes);
                <$t>::from_le_bytes(buf)
            }
        }
    };
}

impl_scalar!(f32, 1);
impl_scalar!(f64, 2);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(Error::shape(format!("rank {} outside 1..=4", dims.len())));
        }
        if dims.contains(&0) {
            return Err(Error::shape(format!("zero-length dimension in {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "dims {dims:?} need {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Panics on an invalid shape; for internal use where dims are known good.
    pub fn zeros(dims: &[usize]) -> Self {
        Self::filled(dims, T::ZERO)
    }

    pub fn filled(dims: &[usize], value: T) -> Self {
        let n = dims.iter().product();
        Self::new(dims.to_vec(), vec![value; n]).expect("valid dims")
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let n = dims.iter().product();
        Self::new(dims.to_vec(), (0..n).map(&mut f).collect()).expect("valid dims")
    }

    /// Elements drawn uniformly from `[lo, hi)`.
    pub fn random_uniform(dims: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Self {
        Self::from_fn(dims, |_| T::from_f64(rng.uniform(lo, hi)))
    }

    pub fn scalar(v: T) -> Self {
        Self {
            dims: vec![1],
            data: vec![v],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(self, dims: &[usize]) -> Result<Self> {
        Self::new(dims.to_vec(), self.data)
    }

    /// Spatial `(H, W, C)` of a rank-3 tensor.
    pub fn hwc(&self) -> Result<(usize, usize, usize)> {
        match self.dims[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::shape(format!("expected H×W×C tensor, got dims {:?}", self.dims))),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64()).sum::<f64>() / self.len() as f64
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: T) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    pub fn check_same_dims(&self, other: &Tensor<T>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Bitwise comparison of dims and payload.
    pub fn bit_eq(&self, other: &Tensor<T>) -> bool {
        if self.dims != other.dims {
            return false;
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        self.data.iter().for_each(|v| v.write_le(&mut a));
        other.data.iter().for_each(|v| v.write_le(&mut b));
        a == b
    }
}
