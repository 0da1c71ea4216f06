//! Minimal row-major tensor over a generic float scalar.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating-point scalar the numeric core is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn from_f64c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense row-major tensor. Invariant: `data.len() == shape.iter().product()`.
#[derive(Clone, PartialEq)]
pub struct Tensor<F: Scalar> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Debug for Tensor<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::shape(format!(
                "shape {shape:?} wants {expect} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Row count of a 2-D tensor.
    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() on non-2D tensor");
        self.shape[0]
    }

    /// Column count of a 2-D tensor.
    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() on non-2D tensor");
        self.shape[1]
    }

    /// Row `r` of a 2-D tensor.
    pub fn row(&self, r: usize) -> &[F] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn check_finite(&self, ctx: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{ctx}: element {i} is {v}")));
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Tensor<F>) -> bool {
        self.shape == other.shape
    }
}

/// `out[b] += in[b] * weights^T` for 2-D `input [B, I]` and `weights [O, I]`.
///
/// Accumulates into `out [B, O]`.
pub fn matmul_nt_acc<F: Scalar>(input: &Tensor<F>, weights: &Tensor<F>, out: &mut Tensor<F>) {
    let (b, i) = (input.rows(), input.cols());
    let (o, wi) = (weights.rows(), weights.cols());
    debug_assert_eq!(i, wi);
    debug_assert_eq!(out.shape(), &[b, o]);
    for bi in 0..b {
        let x = input.row(bi);
        let y = out.row_mut(bi);
        for oi in 0..o {
            let w = weights.row(oi);
            let mut acc = F::zero();
            for k in 0..i {
                acc += x[k] * w[k];
            }
            y[oi] += acc;
        }
    }
}

/// `out[b] = in[b] * weights^T`.
pub fn matmul_nt<F: Scalar>(input: &Tensor<F>, weights: &Tensor<F>) -> Tensor<F> {
    let mut out = Tensor::zeros(&[input.rows(), weights.rows()]);
    matmul_nt_acc(input, weights, &mut out);
    out
}

/// `out[b] = grad[b] * weights` for `grad [B, O]`, `weights [O, I]` -> `[B, I]`.
pub fn matmul_nn<F: Scalar>(grad: &Tensor<F>, weights: &Tensor<F>) -> Tensor<F> {
    let (b, o) = (grad.rows(), grad.cols());
    let i = weights.cols();
    let mut out = Tensor::zeros(&[b, i]);
    for bi in 0..b {
        let g = grad.row(bi);
        let y = out.row_mut(bi);
        for oi in 0..o {
            let go = g[oi];
            if go == F::zero() {
                continue;
            }
            let w = weights.row(oi);
            for k in 0..i {
                y[k] += go * w[k];
            }
        }
    }
    out
}

/// `wgrad += grad^T * input` for `grad [B, O]`, `input [B, I]` -> accumulate into `[O, I]`.
pub fn outer_acc<F: Scalar>(grad: &Tensor<F>, input: &Tensor<F>, wgrad: &mut Tensor<F>) {
    let (b, o) = (grad.rows(), grad.cols());
    let i = input.cols();
    debug_assert_eq!(wgrad.shape(), &[o, i]);
    for bi in 0..b {
        let g = grad.row(bi);
        let x = input.row(bi);
        for oi in 0..o {
            let go = g[oi];
            if go == F::zero() {
                continue;
            }
            let w = wgrad.row_mut(oi);
            for k in 0..i {
                w[k] += go * x[k];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Tensor::<f64>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f64>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn matmul_against_hand_arithmetic() {
        // input [1,2] x weights rows [[1,2],[3,4],[5,6]] -> [5, 11, 17]
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::from_vec(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = matmul_nt(&x, &w);
        assert_eq!(y.data(), &[5.0, 11.0, 17.0]);

        // back: grad [1,0,1] * w -> [1+5, 2+6]
        let g = Tensor::from_vec(&[1, 3], vec![1.0, 0.0, 1.0]).unwrap();
        let back = matmul_nn(&g, &w);
        assert_eq!(back.data(), &[6.0, 8.0]);

        let mut wg = Tensor::zeros(&[3, 2]);
        outer_acc(&g, &x, &mut wg);
        assert_eq!(wg.data(), &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn check_finite_flags_nan() {
        let t = Tensor::from_vec(&[2], vec![1.0, f64::NAN]).unwrap();
        assert!(t.check_finite("test").is_err());
    }
}
