//! Schwinger–Dyson records generated from the model potential.
//!
//! For a field `(X, Y)` the identity reads
//! `E[(tr ⊗ tr)(∂_A X + ∂_B Y)] = E[tr(X 𝖣_A V + Y 𝖣_B V)]`.

use std::collections::HashMap;
use std::fmt::{self, Display, Write as _};

use serde::Serialize;

use crate::coeff::{Coefficient, CouplingPoly};
use crate::error::ChainError;
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::word::{
    cyclic_gradient, dihedral_vanishes, nc_derivative, Letter, TensorTerm, Word, WordPolynomial,
};

/// `V` with `S = Tr V`: `½A² + ½B² − ¼g(A⁴ + B⁴) − ½h(q ABAB + (1−q) ABBA)`.
pub fn potential<C: Coefficient>(q: &C, g: &C, h: &C) -> WordPolynomial<C> {
    let half = C::ratio(1, 2);
    let quarter_g = C::ratio(1, 4) * g.clone();
    let half_h = half.clone() * h.clone();
    WordPolynomial::from_terms([
        (Word::from("AA"), half.clone()),
        (Word::from("BB"), half),
        (Word::from("AAAA"), -quarter_g.clone()),
        (Word::from("BBBB"), -quarter_g),
        (Word::from("ABAB"), -(half_h.clone() * q.clone())),
        (Word::from("ABBA"), -(half_h * (C::one() - q.clone()))),
    ])
}

/// `𝖣_l V`, term by term.
pub fn potential_gradient<C: Coefficient>(l: Letter, q: &C, g: &C, h: &C) -> WordPolynomial<C> {
    let mut out = WordPolynomial::zero();
    for (w, c) in potential(q, g, h).terms() {
        out = out + cyclic_gradient::<C>(w, l).scaled(c);
    }
    out
}

/// One Schwinger–Dyson identity. `None` fields are the zero word.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "C: Coefficient + Serialize")]
pub struct SdeRecord<C> {
    pub field_x: Option<Word>,
    pub field_y: Option<Word>,
    pub lhs: Vec<TensorTerm<C>>,
    /// The right-hand side under the trace, in canonical cyclic form.
    pub rhs: WordPolynomial<C>,
}

pub fn build_sde_with<C: Coefficient>(
    field_x: Option<&Word>,
    field_y: Option<&Word>,
    q: &C,
    g: &C,
    h: &C,
) -> SdeRecord<C> {
    let mut lhs = Vec::new();
    let mut rhs = WordPolynomial::zero();
    for (field, l) in [(field_x, Letter::A), (field_y, Letter::B)] {
        if let Some(w) = field {
            lhs.extend(nc_derivative::<C>(w, l));
            rhs = rhs + potential_gradient(l, q, g, h).left_mul(w);
        }
    }
    SdeRecord {
        field_x: field_x.cloned(),
        field_y: field_y.cloned(),
        lhs,
        rhs: rhs.cyclic_reduced(),
    }
}

pub fn build_sde<T: Real + Coefficient>(
    field_x: Option<&Word>,
    field_y: Option<&Word>,
    params: &ModelParams<T>,
) -> SdeRecord<T> {
    build_sde_with(field_x, field_y, &params.q, &params.g, &params.h)
}

/// The record with coefficients as polynomials in `q, g, h`.
pub fn build_sde_symbolic(
    field_x: Option<&Word>,
    field_y: Option<&Word>,
) -> SdeRecord<CouplingPoly> {
    build_sde_with(
        field_x,
        field_y,
        &CouplingPoly::q(),
        &CouplingPoly::g(),
        &CouplingPoly::h(),
    )
}

/// Fields `X` of the table, each with `Y = 0`.
pub const TABLE_FIELDS: [&str; 11] = [
    "A", "A^3", "B^2A", "BAB", "A^5", "B^4A", "A^3B^2", "B^3AB", "A^2B^2A", "A^2BAB", "ABABA",
];

/// Fields monitored during thermalisation: A, A³, B²A, BAB varying `A`
/// and their mirrors varying `B`.
pub const MONITOR_FIELDS: [&str; 4] = ["A", "A^3", "B^2A", "BAB"];

/// `(X, Y)` pairs of the default monitoring list.
pub fn monitor_fields() -> Vec<(Option<Word>, Option<Word>)> {
    let varying_a = MONITOR_FIELDS.iter().map(|s| (Some(Word::from(s)), None));
    let varying_b = MONITOR_FIELDS
        .iter()
        .map(|s| (None, Some(Word::from(s).swapped())));
    varying_a.chain(varying_b).collect()
}

pub fn table_records() -> Vec<SdeRecord<CouplingPoly>> {
    TABLE_FIELDS
        .iter()
        .map(|s| build_sde_symbolic(Some(&Word::from(s)), None))
        .collect()
}

impl<C: Coefficient> SdeRecord<C> {
    /// Drop terms whose expectation vanishes by dihedral symmetry. Only for
    /// expectation-level use; per-sample residuals keep every term.
    pub fn pruned(&self) -> Self {
        Self {
            field_x: self.field_x.clone(),
            field_y: self.field_y.clone(),
            lhs: self
                .lhs
                .iter()
                .filter(|t| !dihedral_vanishes(&t.left) && !dihedral_vanishes(&t.right))
                .cloned()
                .collect(),
            rhs: self.rhs.pruned(),
        }
    }

    /// Every single-trace word the record needs an estimate for.
    pub fn words(&self) -> Vec<Word> {
        let mut out: Vec<Word> = self.rhs.terms().map(|(w, _)| w.clone()).collect();
        for t in &self.lhs {
            out.push(t.left.canonical());
            out.push(t.right.canonical());
        }
        out.retain(|w| !w.is_identity());
        out.sort();
        out.dedup();
        out
    }

    /// Label as in the table, e.g. `A^3` or `Y = BAB`.
    pub fn label(&self) -> String {
        match (&self.field_x, &self.field_y) {
            (Some(x), None) => x.to_string(),
            (None, Some(y)) => format!("Y = {y}"),
            (Some(x), Some(y)) => format!("(X, Y) = ({x}, {y})"),
            (None, None) => "0".to_string(),
        }
    }

    pub fn map_coefficients<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> SdeRecord<D> {
        SdeRecord {
            field_x: self.field_x.clone(),
            field_y: self.field_y.clone(),
            lhs: self
                .lhs
                .iter()
                .map(|t| TensorTerm {
                    left: t.left.clone(),
                    right: t.right.clone(),
                    coefficient: f(&t.coefficient),
                })
                .collect(),
            rhs: self.rhs.map_coefficients(f),
        }
    }
}

/// Source of correlator estimates for residual evaluation.
pub trait Correlators {
    /// Estimate of `E tr w` for a canonical, non-identity word.
    fn single(&self, w: &Word) -> Option<f64>;
    /// Estimate of `E[tr l · tr r]` for canonical, non-identity words.
    fn pair(&self, l: &Word, r: &Word) -> Option<f64>;
}

/// Correlator estimates keyed by canonical words. Pairs that were not
/// recorded fall back to the product of their single-trace estimates.
#[derive(Clone, Debug, Default)]
pub struct CorrelatorTable {
    singles: HashMap<Word, f64>,
    pairs: HashMap<(Word, Word), f64>,
}

fn pair_key(l: &Word, r: &Word) -> (Word, Word) {
    let (l, r) = (l.canonical(), r.canonical());
    if l <= r {
        (l, r)
    } else {
        (r, l)
    }
}

impl CorrelatorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, w: &Word, value: f64) {
        self.singles.insert(w.canonical(), value);
    }

    pub fn insert_pair(&mut self, l: &Word, r: &Word, value: f64) {
        self.pairs.insert(pair_key(l, r), value);
    }

    pub fn with(mut self, w: &str, value: f64) -> Self {
        self.insert(&Word::from(w), value);
        self
    }
}

impl Correlators for CorrelatorTable {
    fn single(&self, w: &Word) -> Option<f64> {
        self.singles.get(&w.canonical()).copied()
    }

    fn pair(&self, l: &Word, r: &Word) -> Option<f64> {
        if let Some(&v) = self.pairs.get(&pair_key(l, r)) {
            return Some(v);
        }
        Some(self.single(l)? * self.single(r)?)
    }
}

fn lookup_single(est: &impl Correlators, w: &Word) -> Result<f64, ChainError> {
    if w.is_identity() {
        return Ok(1.0);
    }
    est.single(&w.canonical())
        .ok_or_else(|| ChainError::MissingCorrelator(w.to_string()))
}

impl SdeRecord<f64> {
    /// Left-hand side estimate: `Σ c · E[tr l · tr r]`.
    pub fn lhs_value(&self, est: &impl Correlators) -> Result<f64, ChainError> {
        let mut acc = 0.0;
        for t in &self.lhs {
            let v = match (t.left.is_identity(), t.right.is_identity()) {
                (true, _) => lookup_single(est, &t.right)?,
                (_, true) => lookup_single(est, &t.left)?,
                _ => est
                    .pair(&t.left.canonical(), &t.right.canonical())
                    .ok_or_else(|| {
                        ChainError::MissingCorrelator(format!("{} ⊗ {}", t.left, t.right))
                    })?,
            };
            acc += t.coefficient * v;
        }
        Ok(acc)
    }

    pub fn rhs_value(&self, est: &impl Correlators) -> Result<f64, ChainError> {
        self.rhs.evaluate_with(|w| lookup_single(est, w))
    }

    /// `LHS − RHS` on the given estimates.
    pub fn residual(&self, est: &impl Correlators) -> Result<f64, ChainError> {
        Ok(self.lhs_value(est)? - self.rhs_value(est)?)
    }
}

/// `LHS − RHS` of `record` on `estimates`.
pub fn sde_residual(
    record: &SdeRecord<f64>,
    estimates: &impl Correlators,
) -> Result<f64, ChainError> {
    record.residual(estimates)
}

fn write_lhs<C: Coefficient>(
    out: &mut String,
    lhs: &[TensorTerm<C>],
    one: &C,
    fmt_c: impl Fn(&C) -> String,
) {
    out.push_str("tr⊗2[ ");
    if lhs.is_empty() {
        out.push('0');
    }
    for (k, t) in lhs.iter().enumerate() {
        if k > 0 {
            out.push_str(" + ");
        }
        if &t.coefficient != one {
            let _ = write!(out, "{} ", fmt_c(&t.coefficient));
        }
        let _ = write!(out, "{}⊗{}", t.left, t.right);
    }
    out.push_str(" ]");
}

impl Display for SdeRecord<CouplingPoly> {
    /// Two-line layout of the printed table:
    /// `X yields: tr⊗2[ … ]` then `  = tr[ … ]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = format!("{} yields: ", self.label());
        write_lhs(&mut s, &self.lhs, &CouplingPoly::one(), |c| {
            format!("({c})")
        });
        s.push_str("\n    = tr[ ");
        // Words ordered by degree in h, then g, as in the table.
        let mut terms: Vec<_> = self.rhs.terms().collect();
        terms.sort_by_key(|(w, c)| {
            (
                c.to_string().contains('h'),
                c.to_string().contains('g'),
                w.degree(),
            )
        });
        if terms.is_empty() {
            s.push('0');
        }
        for (k, (w, c)) in terms.into_iter().enumerate() {
            let text = c.to_string();
            let single = !text[1..].contains([' ']);
            let (neg, body) = match text.strip_prefix('-') {
                Some(rest) if single => (true, rest.to_string()),
                Some(_) => (true, format!("({})", -c.clone())),
                None if single => (false, text.clone()),
                None => (false, format!("({text})")),
            };
            let sign = match (k, neg) {
                (0, false) => "",
                (0, true) => "-",
                (_, false) => " + ",
                (_, true) => " - ",
            };
            s.push_str(sign);
            if body == "1" {
                let _ = write!(s, "{w}");
            } else {
                let _ = write!(s, "{body} {w}");
            }
        }
        s.push_str(" ]");
        f.write_str(&s)
    }
}

impl Display for SdeRecord<f64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = format!("{} yields: ", self.label());
        write_lhs(&mut s, &self.lhs, &1.0, |c| format!("{c}"));
        s.push_str("\n    = tr[ ");
        if self.rhs.is_zero() {
            s.push('0');
        }
        for (k, (w, c)) in self.rhs.terms().enumerate() {
            match (k, *c < 0.0) {
                (0, false) => {}
                (0, true) => s.push('-'),
                (_, false) => s.push_str(" + "),
                (_, true) => s.push_str(" - "),
            }
            let _ = write!(s, "{} {w}", c.abs());
        }
        s.push_str(" ]");
        f.write_str(&s)
    }
}

/// Serialise and print the whole generated table.
pub fn render_table() -> String {
    table_records()
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join("\n\n")
}
