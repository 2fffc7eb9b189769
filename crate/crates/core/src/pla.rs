//! NAND-NAND programmable logic array with a bore-hole membrane.
//!
//! Six literal columns feed four 3-input product NANDs whose outputs feed two
//! 3-input output NANDs. A hole in the membrane connects a literal (or a
//! product) to one gate input of a NAND; every input without a hole is tied
//! to vacuum, the NAND identity.

use std::fmt;

use thiserror::Error;

use indexmap::IndexMap;

use crate::engine::{EngineError, LogicLevel, QuasiStaticSolver};
use crate::netlist::{Channel, Netlist, NetlistError, Node, VAC};
use crate::stdcells::{expand_nand, CellError, CellParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    S1,
    S1n,
    S0,
    S0n,
    A,
    An,
}

impl Literal {
    /// Column order of the device.
    pub const ALL: [Literal; 6] = [Literal::S1, Literal::S1n, Literal::S0, Literal::S0n, Literal::A, Literal::An];

    pub fn column(self) -> usize {
        self as usize
    }

    pub fn from_column(col: usize) -> Option<Self> {
        Literal::ALL.get(col).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Literal::S1 => "S1",
            Literal::S1n => "S1n",
            Literal::S0 => "S0",
            Literal::S0n => "S0n",
            Literal::A => "A",
            Literal::An => "An",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Literal::ALL.into_iter().find(|l| l.name() == s)
    }

    /// Variable index (0 = S1, 1 = S0, 2 = A) and polarity.
    pub fn var(self) -> (usize, bool) {
        (self.column() / 2, self.column().is_multiple_of(2))
    }

    pub fn complement(self) -> Self {
        Literal::from_column(self.column() ^ 1).expect("columns come in pairs")
    }

    pub fn eval(self, s1: bool, s0: bool, a: bool) -> bool {
        let (var, positive) = self.var();
        [s1, s0, a][var] == positive
    }

    /// Conventional product notation: `S1'` for the complement.
    pub fn pretty(self) -> String {
        let (var, positive) = self.var();
        let base = ["S1", "S0", "A"][var];
        if positive {
            base.to_string()
        } else {
            format!("{base}'")
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Array dimensions and per-gate fan-in caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaShape {
    pub num_literal_columns: usize,
    pub num_products: usize,
    pub num_outputs: usize,
    pub max_and_fanin: usize,
    pub max_or_fanin: usize,
}

impl PlaShape {
    /// The physical chip: 6 literal columns, 4 products, 2 outputs, fan-in 3.
    pub const DEVICE: PlaShape = PlaShape {
        num_literal_columns: 6,
        num_products: 4,
        num_outputs: 2,
        max_and_fanin: 3,
        max_or_fanin: 3,
    };
}

impl Default for PlaShape {
    fn default() -> Self {
        PlaShape::DEVICE
    }
}

/// Output row names, top to bottom.
pub const OUTPUT_NAMES: [&str; 2] = ["N1", "N0"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    And,
    Or,
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plane::And => "AND",
            Plane::Or => "OR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlaError {
    #[error("{plane} {row} has {holes} holes, limit {limit}")]
    FanIn {
        plane: Plane,
        row: String,
        holes: usize,
        limit: usize,
    },
    #[error("pattern is {rows}x{cols}, device expects {want_rows}x{want_cols} in the {plane} plane")]
    Dimensions {
        plane: Plane,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("membrane line {line}: {message}")]
    Membrane { line: usize, message: String },
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Membrane programming: `and_plane[product][literal column]` and
/// `or_plane[output][product]`, true where a hole is bored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HolePattern {
    pub and_plane: Vec<Vec<bool>>,
    pub or_plane: Vec<Vec<bool>>,
}

impl Default for HolePattern {
    fn default() -> Self {
        HolePattern::empty(&PlaShape::DEVICE)
    }
}

impl HolePattern {
    pub fn empty(shape: &PlaShape) -> Self {
        HolePattern {
            and_plane: vec![vec![false; shape.num_literal_columns]; shape.num_products],
            or_plane: vec![vec![false; shape.num_products]; shape.num_outputs],
        }
    }

    pub fn product(&self, row: usize) -> Vec<Literal> {
        self.and_plane[row]
            .iter()
            .enumerate()
            .filter(|(_, h)| **h)
            .filter_map(|(c, _)| Literal::from_column(c))
            .collect()
    }

    pub fn output_products(&self, out: usize) -> Vec<usize> {
        (0..self.or_plane[out].len()).filter(|&r| self.or_plane[out][r]).collect()
    }

    pub fn hole_count(&self) -> usize {
        self.and_plane.iter().chain(&self.or_plane).flatten().filter(|h| **h).count()
    }

    /// Dimension and fan-in check against a shape.
    pub fn check(&self, shape: &PlaShape) -> Result<(), PlaError> {
        let dims = |plane, m: &Vec<Vec<bool>>, want_rows: usize, want_cols: usize| {
            let cols = m.first().map_or(want_cols, Vec::len);
            if m.len() != want_rows || m.iter().any(|r| r.len() != want_cols) {
                return Err(PlaError::Dimensions {
                    plane,
                    rows: m.len(),
                    cols,
                    want_rows,
                    want_cols,
                });
            }
            Ok(())
        };
        dims(Plane::And, &self.and_plane, shape.num_products, shape.num_literal_columns)?;
        dims(Plane::Or, &self.or_plane, shape.num_outputs, shape.num_products)?;
        for (r, row) in self.and_plane.iter().enumerate() {
            let holes = row.iter().filter(|h| **h).count();
            if holes > shape.max_and_fanin {
                return Err(PlaError::FanIn {
                    plane: Plane::And,
                    row: format!("P{}", r + 1),
                    holes,
                    limit: shape.max_and_fanin,
                });
            }
        }
        for (o, row) in self.or_plane.iter().enumerate() {
            let holes = row.iter().filter(|h| **h).count();
            if holes > shape.max_or_fanin {
                return Err(PlaError::FanIn {
                    plane: Plane::Or,
                    row: output_name(o),
                    holes,
                    limit: shape.max_or_fanin,
                });
            }
        }
        Ok(())
    }
}

fn output_name(o: usize) -> String {
    OUTPUT_NAMES.get(o).map_or_else(|| format!("O{o}"), |s| s.to_string())
}

/// Pure Boolean evaluation. An empty product row is constant 0.
pub fn eval_pattern(pattern: &HolePattern, s1: bool, s0: bool, a: bool) -> (bool, bool) {
    let products: Vec<bool> = (0..pattern.and_plane.len())
        .map(|r| {
            let lits = pattern.product(r);
            !lits.is_empty() && lits.iter().all(|l| l.eval(s1, s0, a))
        })
        .collect();
    let out = |o: usize| pattern.output_products(o).iter().any(|&r| products[r]);
    (out(0), out(1))
}

/// Node bindings for an expanded array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaPorts {
    /// One node per literal column, in column order.
    pub literals: [String; 6],
    /// N1, N0.
    pub outputs: [String; 2],
    /// Prefix for internal ids.
    pub prefix: String,
}

impl Default for PlaPorts {
    fn default() -> Self {
        PlaPorts {
            literals: Literal::ALL.map(|l| l.name().to_string()),
            outputs: OUTPUT_NAMES.map(str::to_string),
            prefix: "pla".to_string(),
        }
    }
}

impl PlaPorts {
    pub fn product_node(&self, row: usize) -> String {
        format!("{}.P{}", self.prefix, row + 1)
    }
}

/// Valve-level expansion: six NAND3 cells (18 valves). Each NAND input is its
/// own gate node, joined by a bore-hole channel to its literal or product, or
/// tied to vacuum when unused. Empty product rows are not wired into the OR
/// plane even if a hole selects them.
pub fn expand_pla(pattern: &HolePattern, ports: &PlaPorts, params: &CellParams) -> Result<Netlist, PlaError> {
    let shape = PlaShape::DEVICE;
    pattern.check(&shape)?;
    let mut net = Netlist::new();
    for id in ports.literals.iter().chain(&ports.outputs) {
        net.ensure_node(id, params.capacitance)?;
    }
    let gate = |net: &mut Netlist, gate_id: String, source: Option<&str>| -> Result<String, PlaError> {
        net.add_node(Node::free(&gate_id, params.capacitance))?;
        net.add_channel(Channel {
            a: source.unwrap_or(VAC).to_string(),
            b: gate_id.clone(),
            conductance: params.g_via,
        })?;
        Ok(gate_id)
    };

    let pre = &ports.prefix;
    let mut live = vec![false; shape.num_products];
    for (r, is_live) in live.iter_mut().enumerate() {
        let lits = pattern.product(r);
        *is_live = !lits.is_empty();
        let mut gates = Vec::new();
        for k in 0..shape.max_and_fanin {
            let src = lits.get(k).map(|l| ports.literals[l.column()].as_str());
            gates.push(gate(&mut net, format!("{pre}.p{}.g{k}", r + 1), src)?);
        }
        let refs: Vec<&str> = gates.iter().map(String::as_str).collect();
        let out = ports.product_node(r);
        net.union(&expand_nand(&format!("{pre}.p{}", r + 1), &refs, &out, params)?)?;
    }
    for o in 0..shape.num_outputs {
        let rows: Vec<usize> = pattern.output_products(o).into_iter().filter(|&r| live[r]).collect();
        let mut gates = Vec::new();
        for k in 0..shape.max_or_fanin {
            let src = rows.get(k).map(|&r| ports.product_node(r));
            gates.push(gate(&mut net, format!("{pre}.o{}.g{k}", OUTPUT_NAMES[o]), src.as_deref())?);
        }
        let refs: Vec<&str> = gates.iter().map(String::as_str).collect();
        net.union(&expand_nand(&format!("{pre}.o{}", OUTPUT_NAMES[o]), &refs, &ports.outputs[o], params)?)?;
    }
    Ok(net)
}

const MAGIC: &str = "MEMBRANE v1";

fn literal_header() -> String {
    let names: Vec<&str> = Literal::ALL.iter().map(|l| l.name()).collect();
    format!("literals: {}", names.join(" "))
}

/// Serializes the device pattern. Byte-exact and deterministic.
pub fn encode_membrane(pattern: &HolePattern) -> String {
    let mut out = format!("{MAGIC}\n{}\n", literal_header());
    let row = |label: String, items: Vec<String>| {
        if items.is_empty() {
            format!("{label}:\n")
        } else {
            format!("{label}: {}\n", items.join(" "))
        }
    };
    for r in 0..pattern.and_plane.len() {
        let lits = pattern.product(r).iter().map(|l| l.name().to_string()).collect();
        out.push_str(&row(format!("AND P{}", r + 1), lits));
    }
    for o in 0..pattern.or_plane.len() {
        let prods = pattern.output_products(o).iter().map(|r| format!("P{}", r + 1)).collect();
        out.push_str(&row(format!("OR {}", output_name(o)), prods));
    }
    out
}

/// Strict parser for the membrane file. Rows must appear in device order.
pub fn decode_membrane(text: &str) -> Result<HolePattern, PlaError> {
    let shape = PlaShape::DEVICE;
    let err = |line: usize, message: String| PlaError::Membrane { line, message };
    let mut lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end())).collect();
    while lines.last().is_some_and(|(_, l)| l.is_empty()) {
        lines.pop();
    }
    let mut it = lines.into_iter();
    let mut expect_exact = |want: &str| -> Result<(), PlaError> {
        match it.next() {
            Some((_, l)) if l == want => Ok(()),
            Some((n, l)) => Err(err(n, format!("expected '{want}', got '{l}'"))),
            None => Err(err(0, format!("missing '{want}'"))),
        }
    };
    expect_exact(MAGIC)?;
    expect_exact(&literal_header())?;

    let mut pattern = HolePattern::empty(&shape);
    let labels: Vec<String> = (0..shape.num_products)
        .map(|r| format!("AND P{}", r + 1))
        .chain((0..shape.num_outputs).map(|o| format!("OR {}", output_name(o))))
        .collect();
    for (k, label) in labels.iter().enumerate() {
        let (n, line) = it.next().ok_or_else(|| err(0, format!("missing row '{label}'")))?;
        let rest = line
            .strip_prefix(label.as_str())
            .and_then(|r| r.strip_prefix(':'))
            .ok_or_else(|| err(n, format!("expected row '{label}:', got '{line}'")))?;
        for token in rest.split_whitespace() {
            let (cell, known) = if k < shape.num_products {
                let col = Literal::from_name(token).map(Literal::column);
                (col.map(|c| &mut pattern.and_plane[k][c]), col.is_some())
            } else {
                let prod = token
                    .strip_prefix('P')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&d| (1..=shape.num_products).contains(&d));
                let o = k - shape.num_products;
                (prod.map(|d| &mut pattern.or_plane[o][d - 1]), prod.is_some())
            };
            match cell {
                Some(h) if !*h => *h = true,
                Some(_) => return Err(err(n, format!("repeated token '{token}' in {label}"))),
                None if !known => return Err(err(n, format!("unknown token '{token}' in {label}"))),
                None => unreachable!(),
            }
        }
    }
    if let Some((n, l)) = it.next() {
        return Err(err(n, format!("unexpected line '{l}'")));
    }
    pattern.check(&shape)?;
    Ok(pattern)
}

/// Valve-level truth table of an expanded array: literal columns driven as
/// logic levels, outputs read after the quasi-static fixpoint. Row index is
/// `s1<<2 | s0<<1 | a`.
pub fn quasi_static_table(net: &Netlist, ports: &PlaPorts) -> Result<Vec<(LogicLevel, LogicLevel)>, EngineError> {
    let solver = QuasiStaticSolver::new(net);
    (0..8usize)
        .map(|row| {
            let (s1, s0, a) = (row & 4 != 0, row & 2 != 0, row & 1 != 0);
            let inputs: IndexMap<String, LogicLevel> = Literal::ALL
                .iter()
                .zip(&ports.literals)
                .map(|(l, id)| (id.clone(), LogicLevel::from_bit(l.eval(s1, s0, a))))
                .collect();
            let q = solver.solve(&inputs)?;
            let level = |id: &str| q.level(id).unwrap_or(LogicLevel::Unknown);
            Ok((level(&ports.outputs[0]), level(&ports.outputs[1])))
        })
        .collect()
}
