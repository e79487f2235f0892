//! Dense complex square matrices with split real/imaginary storage, and the
//! hermitian newtype the chain state is built from.

use std::ops::Deref;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::MatrixError;
use crate::scalar::Real;

/// Square complex matrix, row-major, real and imaginary parts in separate
/// buffers so the product kernel vectorises over contiguous rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T> {
    dim: usize,
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            re: vec![T::zero(); dim * dim],
            im: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.re[i * dim + i] = T::one();
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = f(i, j);
                m.re[i * dim + j] = z.re;
                m.im[i * dim + j] = z.im;
            }
        }
        m
    }

    /// Real diagonal matrix.
    pub fn diagonal(values: &[T]) -> Self {
        let dim = values.len();
        let mut m = Self::zeros(dim);
        for (i, &v) in values.iter().enumerate() {
            m.re[i * dim + i] = v;
        }
        m
    }

    pub fn from_parts(dim: usize, re: Vec<T>, im: Vec<T>) -> Result<Self, MatrixError> {
        if re.len() != dim * dim || im.len() != dim * dim {
            return Err(MatrixError::BufferLength {
                expected: dim * dim,
                found: re.len().min(im.len()),
            });
        }
        Ok(Self { dim, re, im })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn re(&self) -> &[T] {
        &self.re
    }

    #[inline]
    pub fn im(&self) -> &[T] {
        &self.im
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        let k = i * self.dim + j;
        Complex::new(self.re[k], self.im[k])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex<T>) {
        let k = i * self.dim + j;
        self.re[k] = z.re;
        self.im[k] = z.im;
    }

    pub fn fill_zero(&mut self) {
        self.re.fill(T::zero());
        self.im.fill(T::zero());
    }

    pub fn copy_from(&mut self, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        self.re.copy_from_slice(&other.re);
        self.im.copy_from_slice(&other.im);
    }

    /// `out = self * rhs`.
    pub fn mul_into(&self, rhs: &Self, out: &mut Self) {
        let n = self.dim;
        debug_assert!(rhs.dim == n && out.dim == n);
        let (one, zero) = (T::one(), T::zero());
        T::gemm(n, one, &self.re, &rhs.re, zero, &mut out.re);
        T::gemm(n, -one, &self.im, &rhs.im, one, &mut out.re);
        T::gemm(n, one, &self.re, &rhs.im, zero, &mut out.im);
        T::gemm(n, one, &self.im, &rhs.re, one, &mut out.im);
    }

    /// `out = self * rhs` for a product known to be hermitian (e.g. `A·A²` or
    /// `B·(A·B)`). The upper triangle is mirrored so the result is exactly
    /// hermitian.
    pub fn mul_hermitian_into(&self, rhs: &Self, out: &mut Self) {
        self.mul_into(rhs, out);
        let n = self.dim;
        let Self {
            re: ore, im: oim, ..
        } = out;
        for i in 0..n {
            oim[i * n + i] = T::zero();
            for j in 0..i {
                ore[i * n + j] = ore[j * n + i];
                oim[i * n + j] = -oim[j * n + i];
            }
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        self.mul_into(rhs, &mut out);
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        self.adjoint_into(&mut out);
        out
    }

    pub fn adjoint_into(&self, out: &mut Self) {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                out.re[j * n + i] = self.re[i * n + j];
                out.im[j * n + i] = -self.im[i * n + j];
            }
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (a, &b) in self.re.iter_mut().zip(&other.re) {
            *a += alpha * b;
        }
        for (a, &b) in self.im.iter_mut().zip(&other.im) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        self.re.iter_mut().for_each(|x| *x *= alpha);
        self.im.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn trace(&self) -> Complex<T> {
        let n = self.dim;
        let mut z = Complex::new(T::zero(), T::zero());
        for i in 0..n {
            z.re += self.re[i * n + i];
            z.im += self.im[i * n + i];
        }
        z
    }

    /// `Tr(self * other)` in O(N²).
    pub fn trace_product(&self, other: &Self) -> Complex<T> {
        let n = self.dim;
        let mut re = T::zero();
        let mut im = T::zero();
        for i in 0..n {
            for j in 0..n {
                let (xr, xi) = (self.re[i * n + j], self.im[i * n + j]);
                let (yr, yi) = (other.re[j * n + i], other.im[j * n + i]);
                re += xr * yr - xi * yi;
                im += xr * yi + xi * yr;
            }
        }
        Complex::new(re, im)
    }

    /// `Tr(M M*) = Σ |M_ij|²`.
    pub fn frobenius_sq(&self) -> T {
        self.re.iter().map(|&x| x * x).sum::<T>() + self.im.iter().map(|&x| x * x).sum::<T>()
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> T {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| r.hypot(i))
            .fold(
                T::zero(),
                |acc, x| if x > acc || x.is_nan() { x } else { acc },
            )
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|x| x.is_finite())
    }

    /// Max-norm of the anti-hermitian part `(M − M*)/2`.
    pub fn hermiticity_deviation(&self) -> T {
        let n = self.dim;
        let half = T::of(0.5);
        let mut dev = T::zero();
        for i in 0..n {
            for j in i..n {
                let dr = (self.re[i * n + j] - self.re[j * n + i]) * half;
                let di = (self.im[i * n + j] + self.im[j * n + i]) * half;
                let d = dr.hypot(di);
                if d > dev || d.is_nan() {
                    dev = d;
                }
            }
        }
        dev
    }

    /// Absolute hermiticity tolerance for this matrix.
    pub fn hermiticity_tolerance(&self) -> T {
        T::hermiticity_tolerance() * (self.max_norm() + T::one())
    }

    /// Replace by `(M + M*)/2`.
    pub fn hermitize_in_place(&mut self) {
        let n = self.dim;
        let half = T::of(0.5);
        for i in 0..n {
            self.im[i * n + i] = T::zero();
            for j in (i + 1)..n {
                let r = (self.re[i * n + j] + self.re[j * n + i]) * half;
                let m = (self.im[i * n + j] - self.im[j * n + i]) * half;
                self.re[i * n + j] = r;
                self.re[j * n + i] = r;
                self.im[i * n + j] = m;
                self.im[j * n + i] = -m;
            }
        }
    }
}

/// A complex matrix that satisfies `M = M*` (exactly, after construction
/// through [`HermitianMatrix::hermitize`] or the samplers).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<T>(ComplexMatrix<T>);

impl<T: Real> HermitianMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self(ComplexMatrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    pub fn diagonal(values: &[T]) -> Self {
        Self(ComplexMatrix::diagonal(values))
    }

    /// Accept `m` if it is hermitian within the relative tolerance, then
    /// symmetrise it exactly.
    pub fn try_new(mut m: ComplexMatrix<T>) -> Result<Self, MatrixError> {
        let deviation = m.hermiticity_deviation();
        let tolerance = m.hermiticity_tolerance();
        if !(deviation <= tolerance) {
            return Err(MatrixError::NotHermitian {
                deviation: deviation.as_f64(),
                tolerance: tolerance.as_f64(),
            });
        }
        m.hermitize_in_place();
        Ok(Self(m))
    }

    /// `(M + M*)/2`, unconditionally.
    pub fn hermitize(mut m: ComplexMatrix<T>) -> Self {
        m.hermitize_in_place();
        Self(m)
    }

    pub(crate) fn inner_mut(&mut self) -> &mut ComplexMatrix<T> {
        &mut self.0
    }

    pub fn into_inner(self) -> ComplexMatrix<T> {
        self.0
    }

    /// Gaussian hermitian matrix with density ∝ exp(−Tr M²/(2σ²)): diagonal
    /// entries N(0, σ²), off-diagonal real and imaginary parts N(0, σ²/2).
    pub fn sample_gaussian<R: Rng + ?Sized>(dim: usize, sigma: f64, rng: &mut R) -> Self {
        let mut m = ComplexMatrix::zeros(dim);
        let off = sigma * std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..dim {
            let d: f64 = rng.sample(StandardNormal);
            m.re[i * dim + i] = T::of(sigma * d);
            for j in (i + 1)..dim {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                let (x, y) = (T::of(off * x), T::of(off * y));
                m.re[i * dim + j] = x;
                m.re[j * dim + i] = x;
                m.im[i * dim + j] = y;
                m.im[j * dim + i] = -y;
            }
        }
        Self(m)
    }

    /// `self += alpha * other`; real `alpha` keeps hermiticity.
    pub fn axpy(&mut self, alpha: T, other: &HermitianMatrix<T>) {
        self.0.axpy(alpha, &other.0);
    }

    pub fn scale(&mut self, alpha: T) {
        self.0.scale(alpha);
    }

    /// `Tr M²`, real for hermitian `M`.
    pub fn trace_sq(&self) -> T {
        self.0.frobenius_sq()
    }

    /// Conjugation `U M U*`.
    pub fn conjugate_by(&self, u: &ComplexMatrix<T>) -> Self {
        let um = u.mul(&self.0);
        Self::hermitize(um.mul(&u.adjoint()))
    }
}

impl<T> Deref for HermitianMatrix<T> {
    type Target = ComplexMatrix<T>;
    fn deref(&self) -> &ComplexMatrix<T> {
        &self.0
    }
}

/// The chain state `X = (A, B)`, or a momentum / force pair of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPair<T> {
    pub a: HermitianMatrix<T>,
    pub b: HermitianMatrix<T>,
}

impl<T: Real> MatrixPair<T> {
    pub fn new(a: HermitianMatrix<T>, b: HermitianMatrix<T>) -> Result<Self, MatrixError> {
        if a.dim() != b.dim() {
            return Err(MatrixError::DimensionMismatch {
                left: a.dim(),
                right: b.dim(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            a: HermitianMatrix::zeros(dim),
            b: HermitianMatrix::zeros(dim),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Momentum draw with kinetic density ∝ exp(−Tr(P_A² + P_B²)/2).
    pub fn sample_momentum<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let a = HermitianMatrix::sample_gaussian(dim, 1.0, rng);
        let b = HermitianMatrix::sample_gaussian(dim, 1.0, rng);
        Self { a, b }
    }

    /// `Tr(P_A² + P_B²)/2`.
    pub fn kinetic_energy(&self) -> T {
        (self.a.trace_sq() + self.b.trace_sq()) * T::of(0.5)
    }

    pub fn axpy(&mut self, alpha: T, other: &MatrixPair<T>) {
        self.a.axpy(alpha, &other.a);
        self.b.axpy(alpha, &other.b);
    }

    pub fn scale(&mut self, alpha: T) {
        self.a.scale(alpha);
        self.b.scale(alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }

    pub fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }

    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.scale(-T::one());
        out
    }

    /// Largest hermiticity deviation of the two components.
    pub fn hermiticity_deviation(&self) -> T {
        self.a
            .hermiticity_deviation()
            .max(self.b.hermiticity_deviation())
    }

    pub fn hermiticity_tolerance(&self) -> T {
        self.a
            .hermiticity_tolerance()
            .max(self.b.hermiticity_tolerance())
    }

    pub fn copy_from(&mut self, other: &Self) {
        self.a.inner_mut().copy_from(&other.a);
        self.b.inner_mut().copy_from(&other.b);
    }

    pub fn hermitize_in_place(&mut self) {
        self.a.inner_mut().hermitize_in_place();
        self.b.inner_mut().hermitize_in_place();
    }

    pub fn conjugate_by(&self, u: &ComplexMatrix<T>) -> Self {
        Self {
            a: self.a.conjugate_by(u),
            b: self.b.conjugate_by(u),
        }
    }

    /// Largest absolute entry difference between two pairs.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let diff = |x: &ComplexMatrix<T>, y: &ComplexMatrix<T>| {
            x.re()
                .iter()
                .zip(y.re())
                .chain(x.im().iter().zip(y.im()))
                .map(|(&p, &q)| (p - q).abs())
                .fold(T::zero(), T::max)
        };
        diff(&self.a, &other.a).max(diff(&self.b, &other.b))
    }
}

/// Haar-like random unitary from the QR factorisation of a complex Ginibre
/// matrix (Gram–Schmidt on the columns, phases fixed by positive diagonal R).
pub fn random_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix<T> {
    let mut cols: Vec<Vec<Complex<f64>>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    for j in 0..dim {
        for k in 0..j {
            let proj: Complex<f64> = (0..dim).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            let (done, rest) = cols.split_at_mut(j);
            for (z, v) in rest[0].iter_mut().zip(&done[k]) {
                *z -= proj * v;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|z| *z /= norm);
    }
    ComplexMatrix::from_fn(dim, |i, j| {
        let z = cols[j][i];
        Complex::new(T::of(z.re), T::of(z.im))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_complex(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix<f64> {
        ComplexMatrix::from_fn(dim, |_, _| {
            Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn naive_mul(x: &ComplexMatrix<f64>, y: &ComplexMatrix<f64>) -> ComplexMatrix<f64> {
        let n = x.dim();
        ComplexMatrix::from_fn(n, |i, j| (0..n).map(|k| x.get(i, k) * y.get(k, j)).sum())
    }

    #[test]
    fn product_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_complex(7, &mut rng);
        let y = random_complex(7, &mut rng);
        let fast = x.mul(&y);
        let slow = naive_mul(&x, &y);
        for i in 0..7 {
            for j in 0..7 {
                assert!((fast.get(i, j) - slow.get(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_product_kernel_matches_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: HermitianMatrix<f64> = HermitianMatrix::sample_gaussian(9, 1.0, &mut rng);
        let b: HermitianMatrix<f64> = HermitianMatrix::sample_gaussian(9, 1.0, &mut rng);
        let ab = a.mul(&b);
        let full = b.mul(&ab);
        let mut half = ComplexMatrix::zeros(9);
        b.mul_hermitian_into(&ab, &mut half);
        for i in 0..9 {
            for j in 0..9 {
                assert!((full.get(i, j) - half.get(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitize_is_idempotent_and_fixes_hermitian_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_complex(6, &mut rng);
        let once = HermitianMatrix::hermitize(m);
        assert_eq!(once.hermiticity_deviation(), 0.0);
        let twice = HermitianMatrix::hermitize(once.clone().into_inner());
        assert_eq!(once, twice);
    }

    #[test]
    fn single_perturbation_gives_half_deviation() {
        let mut m = ComplexMatrix::<f64>::identity(4);
        let eps = 1e-3;
        m.set(1, 2, Complex::new(eps, 0.0));
        assert!((m.hermiticity_deviation() - eps / 2.0).abs() < 1e-15);
        assert!(HermitianMatrix::try_new(m.clone()).is_err());
        let mut tiny = m;
        tiny.set(1, 2, Complex::new(1e-12, 0.0));
        assert!(HermitianMatrix::try_new(tiny).is_ok());
    }

    #[test]
    fn momentum_draw_is_exactly_hermitian_and_seeded() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            MatrixPair::<f64>::sample_momentum(5, &mut rng)
        };
        let p = draw(11);
        assert_eq!(p.hermiticity_deviation(), 0.0);
        assert_eq!(p, draw(11));
        assert_ne!(p, draw(12));
    }

    #[test]
    fn momentum_variance_normalisation() {
        // E Tr P² = N² per matrix, so (1/N²) Tr P² averages to 1.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let dim = 6;
        let draws = 10_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let p: HermitianMatrix<f64> = HermitianMatrix::sample_gaussian(dim, 1.0, &mut rng);
                p.trace_sq() / (dim * dim) as f64
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u: ComplexMatrix<f64> = random_unitary(5, &mut rng);
        let uu = u.mul(&u.adjoint());
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((uu.get(i, j) - Complex::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pair_dimension_mismatch_is_rejected() {
        let a = HermitianMatrix::<f64>::zeros(2);
        let b = HermitianMatrix::<f64>::zeros(3);
        assert!(matches!(
            MatrixPair::new(a, b),
            Err(MatrixError::DimensionMismatch { left: 2, right: 3 })
        ));
    }
}
