//! Real coefficient rings for word polynomials.
//!
//! Complex scalars deliberately have no [`Coefficient`] impl: the couplings
//! are real and so is every coefficient the SDE generator produces.

use std::collections::BTreeMap;
use std::fmt::{self, Debug, Display};
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

pub trait Coefficient:
    Clone
    + PartialEq
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn ratio(num: i64, den: i64) -> Self;
}

macro_rules! float_coefficient {
    ($t:ty) => {
        impl Coefficient for $t {
            #[inline]
            fn zero() -> Self {
                0.0
            }
            #[inline]
            fn one() -> Self {
                1.0
            }
            #[inline]
            fn is_zero(&self) -> bool {
                *self == 0.0
            }
            #[inline]
            fn ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }
        }
    };
}

float_coefficient!(f32);
float_coefficient!(f64);

impl Coefficient for Ratio<i64> {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }
}

/// Exponents of `q`, `g`, `h` in a coupling monomial.
type Powers = [u32; 3];

/// Polynomial in the couplings `q, g, h` with exact rational coefficients.
/// Used to print and golden-test SDE records symbolically.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct CouplingPoly {
    terms: BTreeMap<Powers, Ratio<i64>>,
}

impl CouplingPoly {
    fn monomial(powers: Powers) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(powers, <Ratio<i64> as One>::one());
        Self { terms }
    }

    pub fn q() -> Self {
        Self::monomial([1, 0, 0])
    }

    pub fn g() -> Self {
        Self::monomial([0, 1, 0])
    }

    pub fn h() -> Self {
        Self::monomial([0, 0, 1])
    }

    pub fn constant(c: Ratio<i64>) -> Self {
        let mut p = Self::default();
        p.insert(Powers::default(), c);
        p
    }

    fn insert(&mut self, powers: Powers, c: Ratio<i64>) {
        let entry = self
            .terms
            .entry(powers)
            .or_insert_with(<Ratio<i64> as Zero>::zero);
        *entry += c;
        if Zero::is_zero(entry) {
            self.terms.remove(&powers);
        }
    }

    pub fn evaluate<C: Coefficient>(&self, q: &C, g: &C, h: &C) -> C {
        let pow = |x: &C, k: u32| (0..k).fold(C::one(), |acc, _| acc * x.clone());
        self.terms.iter().fold(C::zero(), |acc, (p, c)| {
            let c = C::ratio(*c.numer(), *c.denom());
            acc + c * pow(q, p[0]) * pow(g, p[1]) * pow(h, p[2])
        })
    }
}

impl Add for CouplingPoly {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (p, c) in rhs.terms {
            self.insert(p, c);
        }
        self
    }
}

impl Neg for CouplingPoly {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.terms.values_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Sub for CouplingPoly {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for CouplingPoly {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::default();
        for (p, c) in &self.terms {
            for (r, d) in &rhs.terms {
                out.insert([p[0] + r[0], p[1] + r[1], p[2] + r[2]], c * d);
            }
        }
        out
    }
}

impl Coefficient for CouplingPoly {
    fn zero() -> Self {
        Self::default()
    }
    fn one() -> Self {
        Self::constant(<Ratio<i64> as One>::one())
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn ratio(num: i64, den: i64) -> Self {
        Self::constant(Ratio::new(num, den))
    }
}

impl Display for CouplingPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // Higher total degree first reads closer to hand-written forms.
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by_key(|(p, _)| (std::cmp::Reverse((p[1] + p[2], p[1])), p[0]));
        for (k, (p, c)) in terms.into_iter().enumerate() {
            let sign = if c.is_negative() { "-" } else { "+" };
            match (k, c.is_negative()) {
                (0, false) => {}
                (0, true) => f.write_str("-")?,
                _ => write!(f, " {sign} ")?,
            }
            let c = c.abs();
            let vars: String = ["q", "g", "h"]
                .iter()
                .zip(p)
                .map(|(v, &e)| match e {
                    0 => String::new(),
                    1 => v.to_string(),
                    e => format!("{v}^{e}"),
                })
                .collect::<Vec<_>>()
                .concat();
            // g and h first, q last, as in "hq".
            let vars = reorder_vars(&vars);
            match (c == <Ratio<i64> as One>::one(), vars.is_empty()) {
                (true, true) => f.write_str("1")?,
                (true, false) => f.write_str(&vars)?,
                (false, true) => write!(f, "{c}")?,
                (false, false) => write!(f, "{c} {vars}")?,
            }
        }
        Ok(())
    }
}

fn reorder_vars(vars: &str) -> String {
    match vars.find('q') {
        Some(0) => {
            let end = vars[1..]
                .find(|ch: char| ch.is_ascii_alphabetic())
                .map_or(vars.len(), |i| i + 1);
            format!("{}{}", &vars[end..], &vars[..end])
        }
        _ => vars.to_string(),
    }
}

impl Debug for CouplingPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Display::fmt(self, f)
    }
}

impl serde::Serialize for CouplingPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
