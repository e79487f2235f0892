//! Words in the two noncommuting letters `A`, `B` and polynomials over them.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coeff::Coefficient;
use crate::error::{MatrixError, WordError};
use crate::matrix::{ComplexMatrix, MatrixPair};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Letter {
    A,
    B,
}

impl Letter {
    pub fn other(self) -> Self {
        match self {
            Letter::A => Letter::B,
            Letter::B => Letter::A,
        }
    }

    fn as_char(self) -> char {
        match self {
            Letter::A => 'A',
            Letter::B => 'B',
        }
    }
}

/// A monomial `M_1 M_2 ⋯ M_p`; the empty word is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Self(Vec::new())
    }

    pub fn new(letters: Vec<Letter>) -> Self {
        Self(letters)
    }

    pub fn letter(l: Letter) -> Self {
        Self(vec![l])
    }

    /// `l^k`.
    pub fn power(l: Letter, k: usize) -> Self {
        Self(vec![l; k])
    }

    /// Parse a word like `A^3BAB^2`, `AAAB` or `1`. Panics on malformed input;
    /// use [`str::parse`] for fallible parsing.
    pub fn from(s: &str) -> Self {
        s.parse().unwrap_or_else(|e| panic!("bad word {s:?}: {e}"))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn degree_in(&self, l: Letter) -> usize {
        self.0.iter().filter(|&&x| x == l).count()
    }

    pub fn deg_a(&self) -> usize {
        self.degree_in(Letter::A)
    }

    pub fn deg_b(&self) -> usize {
        self.degree_in(Letter::B)
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// `w_{k+1} ⋯ w_p w_1 ⋯ w_k`.
    pub fn rotated(&self, k: usize) -> Self {
        if self.0.is_empty() {
            return self.clone();
        }
        let k = k % self.0.len();
        let mut v = Vec::with_capacity(self.0.len());
        v.extend_from_slice(&self.0[k..]);
        v.extend_from_slice(&self.0[..k]);
        Self(v)
    }

    /// Lexicographically least rotation; the key for cyclically equal traces.
    pub fn canonical(&self) -> Self {
        (0..self.0.len().max(1))
            .map(|k| self.rotated(k))
            .min()
            .expect("at least one rotation")
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Self(v)
    }

    /// `w` with letters exchanged `A ↔ B`.
    pub fn swapped(&self) -> Self {
        Self(self.0.iter().map(|l| l.other()).collect())
    }
}

impl FromStr for Word {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, WordError> {
        let s = s.trim();
        if s == "1" {
            return Ok(Self::identity());
        }
        let mut letters = Vec::new();
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                'A' => letters.push(Letter::A),
                'B' => letters.push(Letter::B),
                '^' => {
                    let last = *letters.last().ok_or(WordError::DanglingExponent)?;
                    let mut digits = String::new();
                    while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                        digits.push(*d);
                        chars.next();
                    }
                    let k: usize = digits.parse().map_err(|_| WordError::DanglingExponent)?;
                    if k == 0 {
                        letters.pop();
                    } else {
                        letters.extend(std::iter::repeat_n(last, k - 1));
                    }
                }
                c if c.is_whitespace() => {}
                c => return Err(WordError::InvalidCharacter(c)),
            }
        }
        Ok(Self(letters))
    }
}

impl Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let mut i = 0;
        while i < self.0.len() {
            let l = self.0[i];
            let run = self.0[i..].iter().take_while(|&&x| x == l).count();
            if run == 1 {
                write!(f, "{}", l.as_char())?;
            } else {
                write!(f, "{}^{}", l.as_char(), run)?;
            }
            i += run;
        }
        Ok(())
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// True when the correlator `E tr w` vanishes by dihedral symmetry, i.e. when
/// the degree in either letter is odd.
pub fn dihedral_vanishes(w: &Word) -> bool {
    w.deg_a() % 2 == 1 || w.deg_b() % 2 == 1
}

/// Finite linear combination of words with nonzero real coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct WordPolynomial<C> {
    terms: BTreeMap<Word, C>,
}

impl<C: Coefficient> Default for WordPolynomial<C> {
    fn default() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }
}

impl<C: Coefficient> WordPolynomial<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(w: Word, c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(w, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Word, C)>) -> Self {
        let mut p = Self::zero();
        for (w, c) in terms {
            p.add_term(w, c);
        }
        p
    }

    pub fn add_term(&mut self, w: Word, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&w) {
            Some(old) => {
                let sum = old + c;
                if !sum.is_zero() {
                    self.terms.insert(w, sum);
                }
            }
            None => {
                self.terms.insert(w, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, w: &Word) -> Option<&C> {
        self.terms.get(w)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &C)> {
        self.terms.iter()
    }

    pub fn scaled(&self, c: &C) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|(w, d)| (w.clone(), c.clone() * d.clone())),
        )
    }

    /// `w · self`.
    pub fn left_mul(&self, w: &Word) -> Self {
        Self::from_terms(self.terms.iter().map(|(v, c)| (w.concat(v), c.clone())))
    }

    /// The same functional under the trace: words replaced by their
    /// canonical rotation, equal classes merged.
    pub fn cyclic_reduced(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, c)| (w.canonical(), c.clone())))
    }

    /// Drop words whose correlator vanishes by dihedral symmetry.
    pub fn pruned(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(w, _)| !dihedral_vanishes(w))
                .map(|(w, c)| (w.clone(), c.clone())),
        )
    }

    pub fn map_coefficients<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> WordPolynomial<D> {
        WordPolynomial::from_terms(self.terms.iter().map(|(w, c)| (w.clone(), f(c))))
    }
}

impl<C: Coefficient> Add for WordPolynomial<C> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (w, c) in rhs.terms {
            self.add_term(w, c);
        }
        self
    }
}

impl<C: Coefficient> Neg for WordPolynomial<C> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map_coefficients(|c| -c.clone())
    }
}

impl<C: Coefficient> Sub for WordPolynomial<C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<C: Coefficient> Mul for &WordPolynomial<C> {
    type Output = WordPolynomial<C>;
    fn mul(self, rhs: Self) -> WordPolynomial<C> {
        let mut out = WordPolynomial::zero();
        for (v, c) in &self.terms {
            for (w, d) in &rhs.terms {
                out.add_term(v.concat(w), c.clone() * d.clone());
            }
        }
        out
    }
}

impl<C: Coefficient + Display> Display for WordPolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({c}) {w}")?;
        }
        Ok(())
    }
}

impl<C: Coefficient + Serialize> Serialize for WordPolynomial<C> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.terms.iter())
    }
}

/// `coefficient · left ⊗ right`, evaluated as `tr(left)·tr(right)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorTerm<C = f64> {
    pub left: Word,
    pub right: Word,
    pub coefficient: C,
}

impl<C: Coefficient> TensorTerm<C> {
    /// Both factors rotated to canonical form, which leaves the evaluation
    /// unchanged.
    pub fn canonical(&self) -> Self {
        Self {
            left: self.left.canonical(),
            right: self.right.canonical(),
            coefficient: self.coefficient.clone(),
        }
    }
}

/// `𝖣_l w`: the sum over occurrences of `l` of the rotation starting right
/// after it.
pub fn cyclic_gradient<C: Coefficient>(w: &Word, l: Letter) -> WordPolynomial<C> {
    let p = w.degree();
    let mut out = WordPolynomial::zero();
    for (i, &x) in w.letters().iter().enumerate() {
        if x == l {
            let rot = w.rotated(i + 1);
            out.add_term(Word::new(rot.letters()[..p - 1].to_vec()), C::one());
        }
    }
    out
}

/// `∂_l w`: one tensor term `w_1⋯w_{i−1} ⊗ w_{i+1}⋯w_p` per occurrence of `l`.
pub fn nc_derivative<C: Coefficient>(w: &Word, l: Letter) -> Vec<TensorTerm<C>> {
    let s = w.letters();
    s.iter()
        .enumerate()
        .filter(|(_, &x)| x == l)
        .map(|(i, _)| TensorTerm {
            left: Word::new(s[..i].to_vec()),
            right: Word::new(s[i + 1..].to_vec()),
            coefficient: C::one(),
        })
        .collect()
}

/// Reusable scratch for evaluating many words on one pair.
pub struct WordEvaluator<T> {
    acc: ComplexMatrix<T>,
    tmp: ComplexMatrix<T>,
}

impl<T: Real> WordEvaluator<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            acc: ComplexMatrix::zeros(dim),
            tmp: ComplexMatrix::zeros(dim),
        }
    }

    /// `tr w(A, B) = (1/N) Tr`, accumulated left to right; the last factor
    /// is folded into the trace.
    pub fn trace(&mut self, w: &Word, x: &MatrixPair<T>) -> Complex<T> {
        let n = x.dim();
        if self.acc.dim() != n {
            *self = Self::new(n);
        }
        let pick = |l: Letter| -> &ComplexMatrix<T> {
            match l {
                Letter::A => &x.a,
                Letter::B => &x.b,
            }
        };
        let s = w.letters();
        let inv_n = T::one() / T::of(n as f64);
        let total = match s.len() {
            0 => return Complex::new(T::one(), T::zero()),
            1 => pick(s[0]).trace(),
            len => {
                let first = pick(s[0]);
                if len == 2 {
                    first.trace_product(pick(s[1]))
                } else {
                    first.mul_into(pick(s[1]), &mut self.acc);
                    for &l in &s[2..len - 1] {
                        self.acc.mul_into(pick(l), &mut self.tmp);
                        std::mem::swap(&mut self.acc, &mut self.tmp);
                    }
                    self.acc.trace_product(pick(s[len - 1]))
                }
            }
        };
        Complex::new(total.re * inv_n, total.im * inv_n)
    }
}

/// `(1/N) Tr w(A, B)`; the identity word gives 1.
pub fn evaluate_word<T: Real>(w: &Word, x: &MatrixPair<T>) -> Result<Complex<T>, MatrixError> {
    if x.a.dim() != x.b.dim() {
        return Err(MatrixError::DimensionMismatch {
            left: x.a.dim(),
            right: x.b.dim(),
        });
    }
    Ok(WordEvaluator::new(x.dim()).trace(w, x))
}

impl<C: Coefficient> WordPolynomial<C> {
    /// `Σ c_w · value(w)` for any real-valued word functional.
    pub fn evaluate_with<E>(&self, mut value: impl FnMut(&Word) -> Result<C, E>) -> Result<C, E> {
        let mut acc = C::zero();
        for (w, c) in &self.terms {
            acc = acc + c.clone() * value(w)?;
        }
        Ok(acc)
    }
}
