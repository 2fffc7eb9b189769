//! Exact two-level minimization over the three variables S1, S0, A.

use std::cmp::Ordering;
use std::fmt;

use crate::pla::{Literal, OUTPUT_NAMES};

use super::table::TransitionTable;

/// A product term. Variable bits follow the row index: bit 2 = S1,
/// bit 1 = S0, bit 0 = A. `care` marks variables present in the product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cube {
    pub care: u8,
    pub value: u8,
}

impl Cube {
    pub const ONE: Cube = Cube { care: 0, value: 0 };

    pub fn covers(self, minterm: usize) -> bool {
        (minterm as u8 & self.care) == self.value
    }

    /// Minterms covered, as an 8-bit mask.
    pub fn mask(self) -> u8 {
        (0..8).filter(|&m| self.covers(m)).fold(0, |acc, m| acc | 1 << m)
    }

    pub fn literal_count(self) -> usize {
        self.care.count_ones() as usize
    }

    /// Literals in column order.
    pub fn literals(self) -> Vec<Literal> {
        let mut out = Vec::new();
        for (var, bit) in [2u8, 1, 0].into_iter().enumerate() {
            if self.care >> bit & 1 == 1 {
                let positive = self.value >> bit & 1 == 1;
                out.push(Literal::from_column(2 * var + !positive as usize).unwrap());
            }
        }
        out
    }

    pub fn from_literals(lits: &[Literal]) -> Option<Cube> {
        let mut c = Cube::ONE;
        for l in lits {
            let (var, positive) = l.var();
            let bit = 1u8 << (2 - var);
            if c.care & bit != 0 && (c.value & bit != 0) != positive {
                return None;
            }
            c.care |= bit;
            if positive {
                c.value |= bit;
            }
        }
        Some(c)
    }

    fn columns(self) -> Vec<usize> {
        self.literals().into_iter().map(Literal::column).collect()
    }

    /// Lexicographic order on column lists.
    pub fn lex_cmp(self, other: Cube) -> Ordering {
        self.columns().cmp(&other.columns())
    }

    pub fn all() -> impl Iterator<Item = Cube> {
        (0u8..8).flat_map(|care| {
            (0u8..8)
                .filter(move |v| v & !care == 0)
                .map(move |value| Cube { care, value })
        })
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.care == 0 {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.literals().into_iter().map(Literal::pretty).collect();
        f.write_str(&parts.join("·"))
    }
}

/// Minimized equations for N1 and N0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SopEquations {
    pub outputs: [Vec<Cube>; 2],
}

impl SopEquations {
    pub fn eval(&self, out: usize, minterm: usize) -> bool {
        self.outputs[out].iter().any(|c| c.covers(minterm))
    }

    pub fn distinct_products(&self) -> Vec<Cube> {
        let mut all: Vec<Cube> = self.outputs.iter().flatten().copied().collect();
        all.sort_by(|a, b| a.lex_cmp(*b));
        all.dedup();
        all
    }
}

impl fmt::Display for SopEquations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, terms) in OUTPUT_NAMES.iter().zip(&self.outputs) {
            let rhs = if terms.is_empty() {
                "0".to_string()
            } else {
                terms.iter().map(Cube::to_string).collect::<Vec<_>>().join(" + ")
            };
            writeln!(f, "{name} = {rhs}")?;
        }
        Ok(())
    }
}

/// Prime implicants of the on-set mask.
pub fn prime_implicants(onset: u8) -> Vec<Cube> {
    let implicants: Vec<Cube> = Cube::all().filter(|c| c.mask() & !onset == 0).collect();
    implicants
        .iter()
        .copied()
        .filter(|c| {
            !implicants
                .iter()
                .any(|d| d != c && d.mask() & c.mask() == c.mask())
        })
        .collect()
}

/// Ranking of covers: fewer products, fewer literals, then lexicographic.
pub fn cover_cmp(a: &[Cube], b: &[Cube]) -> Ordering {
    let lits = |c: &[Cube]| c.iter().map(|p| p.literal_count()).sum::<usize>();
    let cols = |c: &[Cube]| c.iter().map(|p| p.columns()).collect::<Vec<_>>();
    a.len()
        .cmp(&b.len())
        .then(lits(a).cmp(&lits(b)))
        .then_with(|| cols(a).cmp(&cols(b)))
}

/// Minimum cover of one function by prime implicants.
pub fn minimize(onset: u8) -> Vec<Cube> {
    if onset == 0 {
        return Vec::new();
    }
    let primes = prime_implicants(onset);
    let mut best: Option<Vec<Cube>> = None;
    for subset in 1u32..(1 << primes.len()) {
        let mut cover: Vec<Cube> = (0..primes.len())
            .filter(|i| subset >> i & 1 == 1)
            .map(|i| primes[i])
            .collect();
        if cover.iter().fold(0u8, |m, c| m | c.mask()) != onset {
            continue;
        }
        cover.sort_by(|a, b| a.lex_cmp(*b));
        if best.as_ref().is_none_or(|b| cover_cmp(&cover, b) == Ordering::Less) {
            best = Some(cover);
        }
    }
    best.expect("the prime set always covers the on-set")
}

pub fn derive_sop(t: &TransitionTable) -> SopEquations {
    SopEquations {
        outputs: [minimize(t.onset(1)), minimize(t.onset(0))],
    }
}
