use thiserror::Error;

use crate::pla::{HolePattern, Literal, PlaShape, OUTPUT_NAMES};

use super::minimize::{Cube, SopEquations};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CapacityError {
    #[error("products {count} > {limit}")]
    Products { count: usize, limit: usize },
    #[error("product {product} has {count} literals > {limit}")]
    Literals { product: String, count: usize, limit: usize },
    #[error("{output} uses {count} products > {limit}")]
    OutputFanIn { output: String, count: usize, limit: usize },
}

/// An empty product row evaluates to 0, so a constant-1 output is realized
/// as `S1 + S1'`.
fn expand_tautology(terms: &[Cube]) -> Vec<Cube> {
    if terms.contains(&Cube::ONE) {
        vec![
            Cube::from_literals(&[Literal::S1]).unwrap(),
            Cube::from_literals(&[Literal::S1n]).unwrap(),
        ]
    } else {
        terms.to_vec()
    }
}

/// Places distinct products in lexicographic order on rows P1.. and wires
/// the OR plane. Shared products occupy one row.
pub fn fit_pla(eqs: &SopEquations, shape: &PlaShape) -> Result<HolePattern, CapacityError> {
    let outputs: Vec<Vec<Cube>> = eqs.outputs.iter().map(|t| expand_tautology(t)).collect();
    let mut rows: Vec<Cube> = outputs.iter().flatten().copied().collect();
    rows.sort_by(|a, b| a.lex_cmp(*b));
    rows.dedup();
    if rows.len() > shape.num_products {
        return Err(CapacityError::Products {
            count: rows.len(),
            limit: shape.num_products,
        });
    }
    let mut pattern = HolePattern::empty(shape);
    for (r, cube) in rows.iter().enumerate() {
        if cube.literal_count() > shape.max_and_fanin {
            return Err(CapacityError::Literals {
                product: cube.to_string(),
                count: cube.literal_count(),
                limit: shape.max_and_fanin,
            });
        }
        for lit in cube.literals() {
            pattern.and_plane[r][lit.column()] = true;
        }
    }
    for (o, terms) in outputs.iter().enumerate() {
        if terms.len() > shape.max_or_fanin {
            return Err(CapacityError::OutputFanIn {
                output: OUTPUT_NAMES[o].to_string(),
                count: terms.len(),
                limit: shape.max_or_fanin,
            });
        }
        for t in terms {
            let r = rows.iter().position(|c| c == t).expect("row exists");
            pattern.or_plane[o][r] = true;
        }
    }
    Ok(pattern)
}
