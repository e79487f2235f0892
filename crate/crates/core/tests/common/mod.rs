//! Hand transcription of the published Schwinger-Dyson table.

use twomat::coeff::{Coefficient, CouplingPoly as P};
use twomat::sde::{build_sde_symbolic, TABLE_FIELDS};
use twomat::word::{Word, WordPolynomial};

pub struct Row {
    pub field: &'static str,
    pub lhs: &'static [(&'static str, &'static str)],
    pub rhs: Vec<(P, &'static str)>,
}

pub fn rows() -> Vec<Row> {
    let one = P::one;
    let g = || -P::g();
    let hq = || -(P::h() * P::q());
    let h1q = || -(P::h() * (P::one() - P::q()));
    let half = || -(P::ratio(1, 2) * P::h() * (P::one() - P::q()));
    vec![
        Row {
            field: "A",
            lhs: &[("1", "1")],
            rhs: vec![
                (one(), "A^2"),
                (g(), "A^4"),
                (h1q(), "A^2B^2"),
                (hq(), "ABAB"),
            ],
        },
        Row {
            field: "A^3",
            lhs: &[("1", "A^2"), ("A", "A"), ("A^2", "1")],
            rhs: vec![
                (one(), "A^4"),
                (g(), "A^6"),
                (h1q(), "A^4B^2"),
                (hq(), "A^3BAB"),
            ],
        },
        Row {
            field: "B^2A",
            lhs: &[("B^2", "1")],
            // The printed table has B^6A^2 in the third slot; the product
            // B^2A · AB^2 is B^2A^2B^2.
            rhs: vec![
                (one(), "B^2A^2"),
                (g(), "B^2A^4"),
                (half(), "B^2A^2B^2"),
                (hq(), "B^3ABA"),
                (half(), "B^2AB^2A"),
            ],
        },
        Row {
            field: "BAB",
            lhs: &[("B", "B")],
            rhs: vec![
                (one(), "ABAB"),
                (g(), "A^3BAB"),
                (hq(), "BAB^2AB"),
                (h1q(), "BAB^3A"),
            ],
        },
        Row {
            field: "A^5",
            lhs: &[
                ("1", "A^4"),
                ("A", "A^3"),
                ("A^2", "A^2"),
                ("A^3", "A"),
                ("A^4", "1"),
            ],
            rhs: vec![
                (one(), "A^6"),
                (g(), "A^8"),
                (h1q(), "A^6B^2"),
                (hq(), "A^5BAB"),
            ],
        },
        Row {
            field: "B^4A",
            lhs: &[("B^4", "1")],
            rhs: vec![
                (one(), "B^4A^2"),
                (g(), "B^4A^4"),
                (half(), "B^6A^2"),
                (hq(), "B^4ABAB"),
                (half(), "B^4AB^2A"),
            ],
        },
        Row {
            field: "A^3B^2",
            lhs: &[("1", "A^2B^2"), ("A", "AB^2"), ("A^2", "B^2")],
            rhs: vec![
                (one(), "A^4B^2"),
                (g(), "A^6B^2"),
                (half(), "A^3B^2AB^2"),
                (hq(), "A^3B^3AB"),
                (half(), "A^4B^4"),
            ],
        },
        Row {
            field: "B^3AB",
            lhs: &[("B^3", "B")],
            rhs: vec![
                (one(), "B^3ABA"),
                (g(), "B^3ABA^3"),
                (half(), "B^5ABA"),
                (hq(), "B^3AB^2AB"),
                (half(), "B^3AB^3A"),
            ],
        },
        Row {
            field: "A^2B^2A",
            lhs: &[("1", "AB^2A"), ("A", "B^2A"), ("A^2B^2", "1")],
            rhs: vec![
                (one(), "A^2B^2A^2"),
                (g(), "A^2B^2A^4"),
                (half(), "A^2B^2A^2B^2"),
                (hq(), "A^2B^2ABAB"),
                (half(), "A^2B^2AB^2A"),
            ],
        },
        Row {
            field: "A^2BAB",
            lhs: &[("1", "ABAB"), ("A", "BAB"), ("A^2B", "B")],
            rhs: vec![
                (one(), "A^2BABA"),
                (g(), "A^2BABA^3"),
                (half(), "A^2BABAB^2"),
                (hq(), "A^2BAB^2AB"),
                (half(), "A^2BAB^3A"),
            ],
        },
        Row {
            field: "ABABA",
            lhs: &[("1", "BABA"), ("AB", "BA"), ("ABAB", "1")],
            rhs: vec![
                (one(), "ABABA^2"),
                (g(), "ABABA^4"),
                (half(), "ABABA^2B^2"),
                (hq(), "ABABABAB"),
                (half(), "BABAB^2A^2"),
            ],
        },
    ]
}

pub fn transcribed_rhs(row: &Row) -> WordPolynomial<P> {
    WordPolynomial::from_terms(row.rhs.iter().map(|(c, w)| (Word::from(w), c.clone())))
        .cyclic_reduced()
}

/// First mismatch between the generated and transcribed rows, if any.
pub fn mismatch() -> Option<String> {
    let rows = rows();
    if rows.len() != TABLE_FIELDS.len() {
        return Some(format!("{} rows transcribed", rows.len()));
    }
    for (row, field) in rows.iter().zip(TABLE_FIELDS) {
        if row.field != field {
            return Some(format!("row order: {} vs {field}", row.field));
        }
        let rec = build_sde_symbolic(Some(&Word::from(row.field)), None);
        let lhs: Vec<(Word, Word)> = rec
            .lhs
            .iter()
            .map(|t| (t.left.clone(), t.right.clone()))
            .collect();
        let expected: Vec<(Word, Word)> = row
            .lhs
            .iter()
            .map(|(l, r)| (Word::from(l), Word::from(r)))
            .collect();
        if lhs != expected || rec.lhs.iter().any(|t| t.coefficient != P::one()) {
            return Some(format!("lhs of row {}", row.field));
        }
        if rec.rhs != transcribed_rhs(row) {
            return Some(format!("rhs of row {}", row.field));
        }
    }
    None
}
