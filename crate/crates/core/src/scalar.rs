//! Floating-point scalar abstraction shared by the matrix, model and chain code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point type the numerics are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Relative hermiticity tolerance; multiplied by `max-norm + 1`.
    fn hermiticity_tolerance() -> Self;

    /// Lossy conversion from `f64`, used for couplings and random draws.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    /// `c = alpha·a·b + beta·c` for row-major `n×n` buffers.
    fn gemm(n: usize, alpha: Self, a: &[Self], b: &[Self], beta: Self, c: &mut [Self]);
}

fn check_gemm<T>(n: usize, a: &[T], b: &[T], c: &[T]) {
    assert!(a.len() >= n * n && b.len() >= n * n && c.len() >= n * n);
}

impl Real for f64 {
    #[inline]
    fn hermiticity_tolerance() -> Self {
        1e-8
    }

    fn gemm(n: usize, alpha: f64, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
        check_gemm(n, a, b, c);
        let s = n as isize;
        // SAFETY: all three buffers hold at least n*n elements (checked above)
        // and c does not alias a or b since it is borrowed mutably.
        unsafe {
            matrixmultiply::dgemm(
                n,
                n,
                n,
                alpha,
                a.as_ptr(),
                s,
                1,
                b.as_ptr(),
                s,
                1,
                beta,
                c.as_mut_ptr(),
                s,
                1,
            );
        }
    }
}

impl Real for f32 {
    #[inline]
    fn hermiticity_tolerance() -> Self {
        // 1e-8 is below f32 resolution; 100 ulp of unity instead.
        100.0 * f32::EPSILON
    }

    fn gemm(n: usize, alpha: f32, a: &[f32], b: &[f32], beta: f32, c: &mut [f32]) {
        check_gemm(n, a, b, c);
        let s = n as isize;
        // SAFETY: as for f64.
        unsafe {
            matrixmultiply::sgemm(
                n,
                n,
                n,
                alpha,
                a.as_ptr(),
                s,
                1,
                b.as_ptr(),
                s,
                1,
                beta,
                c.as_mut_ptr(),
                s,
                1,
            );
        }
    }
}
