//! The two-matrix action
//! `S = ½Tr(A²+B²) − (g/4)Tr(A⁴+B⁴) − (h/2)Tr(A{B,A}_q B)`,
//! `{B,A}_q = qBA + (1−q)AB`, and its force `f = −N∇S`.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::matrix::{ComplexMatrix, HermitianMatrix, MatrixPair};
use crate::scalar::Real;

/// A point `(q, g, h, N)` of model space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub q: T,
    pub g: T,
    pub h: T,
    /// Matrix size `N`.
    pub size: usize,
}

impl<T: Real> ModelParams<T> {
    pub fn new(q: T, g: T, h: T, size: usize) -> Result<Self, ModelError> {
        if !(q >= T::zero() && q <= T::one()) {
            return Err(ModelError::QOutOfRange(q.as_f64()));
        }
        if size == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if !g.is_finite() || !h.is_finite() {
            return Err(ModelError::NonFiniteCoupling);
        }
        Ok(Self { q, g, h, size })
    }

    pub fn with_couplings(self, g: T, h: T) -> Result<Self, ModelError> {
        Self::new(self.q, g, h, self.size)
    }

    #[inline]
    pub fn n_real(&self) -> T {
        T::of(self.size as f64)
    }

    fn check_state(&self, x: &MatrixPair<T>) -> Result<(), ModelError> {
        if x.dim() != self.size {
            return Err(ModelError::StateDimension {
                expected: self.size,
                state: x.dim(),
            });
        }
        Ok(())
    }
}

/// The unnormalised traces the action is built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceInvariants<T> {
    pub a2: T,
    pub b2: T,
    pub a4: T,
    pub b4: T,
    pub abab: T,
    pub abba: T,
}

impl<T: Real> TraceInvariants<T> {
    /// Three products (`A²`, `B²`, `AB`) and O(N²) contractions.
    pub fn compute(x: &MatrixPair<T>) -> Result<Self, ModelError> {
        let n = x.dim();
        let mut a2 = ComplexMatrix::zeros(n);
        let mut b2 = ComplexMatrix::zeros(n);
        let mut ab = ComplexMatrix::zeros(n);
        x.a.mul_hermitian_into(&x.a, &mut a2);
        x.b.mul_hermitian_into(&x.b, &mut b2);
        x.a.mul_into(&x.b, &mut ab);
        let abab = ab.trace_product(&ab);
        // 1e-10 relative is beyond f32 resolution; floor at 64 ulp.
        let rel = T::of(1e-10).max(T::epsilon() * T::of(64.0));
        let bound = rel * T::of(n as f64) * (T::one() + abab.re.abs());
        if abab.im.abs() > bound {
            return Err(ModelError::ImaginaryTrace {
                imaginary: abab.im.as_f64(),
                bound: bound.as_f64(),
            });
        }
        Ok(Self {
            a2: x.a.trace_sq(),
            b2: x.b.trace_sq(),
            a4: a2.frobenius_sq(),
            b4: b2.frobenius_sq(),
            abab: abab.re,
            abba: ab.frobenius_sq(),
        })
    }

    pub fn action(&self, params: &ModelParams<T>) -> T {
        let half = T::of(0.5);
        let quarter = T::of(0.25);
        half * (self.a2 + self.b2)
            - params.g * quarter * (self.a4 + self.b4)
            - params.h * half * (params.q * self.abab + (T::one() - params.q) * self.abba)
    }

    /// `−Tr ABBA ≤ Tr ABAB ≤ Tr ABBA ≤ ½Tr(A⁴+B⁴)` with absolute slack.
    pub fn satisfies_hierarchy(&self, slack: T) -> bool {
        let half = T::of(0.5);
        -self.abba <= self.abab + slack
            && self.abab <= self.abba + slack
            && self.abba <= half * (self.a4 + self.b4) + slack
    }
}

/// `S(A, B)`. The imaginary part of `Tr ABAB` is checked and discarded.
pub fn action<T: Real>(params: &ModelParams<T>, x: &MatrixPair<T>) -> Result<T, ModelError> {
    params.check_state(x)?;
    Ok(TraceInvariants::compute(x)?.action(params))
}

/// Scratch matrices for [`force_into`]; one per chain.
#[derive(Clone, Debug)]
pub struct ForceWorkspace<T> {
    a2: ComplexMatrix<T>,
    a3: ComplexMatrix<T>,
    b2: ComplexMatrix<T>,
    b3: ComplexMatrix<T>,
    ba: ComplexMatrix<T>,
    bab: ComplexMatrix<T>,
    aba: ComplexMatrix<T>,
    ab2: ComplexMatrix<T>,
    ba2: ComplexMatrix<T>,
}

impl<T: Real> ForceWorkspace<T> {
    pub fn new(dim: usize) -> Self {
        let z = || ComplexMatrix::zeros(dim);
        Self {
            a2: z(),
            a3: z(),
            b2: z(),
            b3: z(),
            ba: z(),
            bab: z(),
            aba: z(),
            ab2: z(),
            ba2: z(),
        }
    }
}

/// `f = −N∇S`:
/// `f_A = −N[A − gA³ − hq·BAB − ½h(1−q)(AB² + B²A)]` and the `A ↔ B` mirror.
pub fn force<T: Real>(
    params: &ModelParams<T>,
    x: &MatrixPair<T>,
) -> Result<MatrixPair<T>, ModelError> {
    params.check_state(x)?;
    let mut ws = ForceWorkspace::new(x.dim());
    let mut out = MatrixPair::zeros(x.dim());
    force_into(params, x, &mut ws, &mut out)?;
    Ok(out)
}

/// Allocation-free force evaluation (nine matrix products).
pub fn force_into<T: Real>(
    params: &ModelParams<T>,
    x: &MatrixPair<T>,
    ws: &mut ForceWorkspace<T>,
    out: &mut MatrixPair<T>,
) -> Result<(), ModelError> {
    let (a, b) = (&*x.a, &*x.b);
    a.mul_hermitian_into(a, &mut ws.a2);
    a.mul_hermitian_into(&ws.a2, &mut ws.a3);
    b.mul_hermitian_into(b, &mut ws.b2);
    b.mul_hermitian_into(&ws.b2, &mut ws.b3);
    b.mul_into(a, &mut ws.ba);
    ws.ba.mul_hermitian_into(b, &mut ws.bab);
    a.mul_hermitian_into(&ws.ba, &mut ws.aba);
    a.mul_into(&ws.b2, &mut ws.ab2);
    ws.ba.mul_into(a, &mut ws.ba2);

    let n = params.n_real();
    let q = params.q;
    let g = params.g;
    let h = params.h;
    let c_mixed = h * q;
    let c_sym = T::of(0.5) * h * (T::one() - q);
    // AB² + B²A = AB² + (AB²)*, and A²B + BA² = BA² + (BA²)*.
    fill_force(
        out.a.inner_mut(),
        a,
        &ws.a3,
        &ws.bab,
        &ws.ab2,
        n,
        g,
        c_mixed,
        c_sym,
    );
    fill_force(
        out.b.inner_mut(),
        b,
        &ws.b3,
        &ws.aba,
        &ws.ba2,
        n,
        g,
        c_mixed,
        c_sym,
    );

    let deviation = out.hermiticity_deviation();
    let tolerance = out.hermiticity_tolerance();
    if deviation > tolerance {
        return Err(crate::error::MatrixError::NotHermitian {
            deviation: deviation.as_f64(),
            tolerance: tolerance.as_f64(),
        }
        .into());
    }
    out.hermitize_in_place();
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fill_force<T: Real>(
    out: &mut ComplexMatrix<T>,
    m: &ComplexMatrix<T>,
    m3: &ComplexMatrix<T>,
    sandwich: &ComplexMatrix<T>,
    skew: &ComplexMatrix<T>,
    n: T,
    g: T,
    c_mixed: T,
    c_sym: T,
) {
    let dim = m.dim();
    for i in 0..dim {
        for j in 0..dim {
            let k = i * dim + j;
            let kt = j * dim + i;
            let re = m.re()[k]
                - g * m3.re()[k]
                - c_mixed * sandwich.re()[k]
                - c_sym * (skew.re()[k] + skew.re()[kt]);
            let im = m.im()[k]
                - g * m3.im()[k]
                - c_mixed * sandwich.im()[k]
                - c_sym * (skew.im()[k] - skew.im()[kt]);
            out.set(i, j, num_complex::Complex::new(-n * re, -n * im));
        }
    }
}

/// Whether `S⁽q1⁾(X) ≤ S⁽q2⁾(X)` for `g, h ≥ 0`, `q1 < q2`.
pub fn q_monotonicity_check<T: Real>(
    g: T,
    h: T,
    x: &MatrixPair<T>,
    q1: T,
    q2: T,
) -> Result<bool, ModelError> {
    if g < T::zero() || h < T::zero() || !(q1 < q2) {
        return Err(ModelError::MonotonicityDomain);
    }
    let lo = ModelParams::new(q1, g, h, x.dim())?;
    let hi = ModelParams::new(q2, g, h, x.dim())?;
    let traces = TraceInvariants::compute(x)?;
    let slack = T::of(1e-12) * (T::one() + traces.abba.abs());
    Ok(traces.action(&lo) <= traces.action(&hi) + slack)
}

/// Apply `x → x + t·e` along a single hermitian coordinate; used by the
/// finite-difference oracles in the tests.
pub fn perturb_coordinate<T: Real>(x: &MatrixPair<T>, which: Coordinate, t: T) -> MatrixPair<T> {
    let mut out = x.clone();
    let target: &mut HermitianMatrix<T> = if which.on_b { &mut out.b } else { &mut out.a };
    let m = target.inner_mut();
    let (i, j) = (which.row, which.col);
    let z = m.get(i, j);
    match which.part {
        Part::Diagonal => m.set(i, i, z + num_complex::Complex::new(t, T::zero())),
        Part::Real => {
            m.set(i, j, z + num_complex::Complex::new(t, T::zero()));
            let w = m.get(j, i);
            m.set(j, i, w + num_complex::Complex::new(t, T::zero()));
        }
        Part::Imaginary => {
            m.set(i, j, z + num_complex::Complex::new(T::zero(), t));
            let w = m.get(j, i);
            m.set(j, i, w - num_complex::Complex::new(T::zero(), t));
        }
    }
    out
}

/// One of the `2N²` real coordinates of a hermitian pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coordinate {
    pub on_b: bool,
    pub row: usize,
    pub col: usize,
    pub part: Part,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Diagonal,
    Real,
    Imaginary,
}

/// All `2N²` coordinates (diagonal, then real and imaginary parts above it).
pub fn coordinates(dim: usize) -> Vec<Coordinate> {
    let mut out = Vec::with_capacity(2 * dim * dim);
    for on_b in [false, true] {
        for row in 0..dim {
            out.push(Coordinate {
                on_b,
                row,
                col: row,
                part: Part::Diagonal,
            });
            for col in (row + 1)..dim {
                out.push(Coordinate {
                    on_b,
                    row,
                    col,
                    part: Part::Real,
                });
                out.push(Coordinate {
                    on_b,
                    row,
                    col,
                    part: Part::Imaginary,
                });
            }
        }
    }
    out
}
