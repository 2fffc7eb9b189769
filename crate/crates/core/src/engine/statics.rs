use std::collections::HashMap;

use indexmap::IndexMap;

use super::compiled::Compiled;
use super::{read_logic, EngineError, LogicLevel};
use crate::netlist::Netlist;

/// Steady-state pressures of the resistive network.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution {
    pub pressures: IndexMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Disjoint-set forest with path halving.
struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` for a singular system.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Core static solve on the compiled form.
///
/// `driven` pins nodes in addition to the rails. Components that touch no
/// pinned node are floating and take the capacitance-weighted mean of their
/// `prior` pressures.
pub(crate) fn solve_compiled(
    c: &Compiled,
    open: &[bool],
    covered: &[bool],
    driven: &[Option<f64>],
    prior: &[Option<f64>],
    warnings: &mut Vec<String>,
) -> Vec<f64> {
    let n = c.len();
    let pinned: Vec<Option<f64>> = (0..n).map(|i| c.fixed[i].or(driven[i])).collect();
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::new();
    c.for_each_conducting(open, covered, |a, b, g| {
        if a != b {
            edges.push((a, b, g));
            if pinned[a].is_none() && pinned[b].is_none() {
                uf.union(a, b);
            }
        }
    });

    let mut members: IndexMap<usize, Vec<usize>> = IndexMap::new();
    for i in (0..n).filter(|&i| pinned[i].is_none()) {
        members.entry(uf.find(i)).or_default().push(i);
    }
    let mut comp_edges: HashMap<usize, Vec<(usize, usize, f64)>> = HashMap::new();
    for &(a, b, g) in &edges {
        let free = if pinned[a].is_none() { a } else { b };
        if pinned[free].is_none() {
            comp_edges.entry(uf.find(free)).or_default().push((a, b, g));
        }
    }

    let mut p: Vec<f64> = (0..n).map(|i| pinned[i].unwrap_or(0.0)).collect();
    for (root, nodes) in &members {
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut a = vec![vec![0.0; nodes.len()]; nodes.len()];
        let mut rhs = vec![0.0; nodes.len()];
        let mut anchored = false;
        for &(x, y, g) in comp_edges.get(root).into_iter().flatten() {
            match (pinned[x], pinned[y]) {
                (None, None) => {
                    let (i, j) = (local[&x], local[&y]);
                    a[i][i] += g;
                    a[j][j] += g;
                    a[i][j] -= g;
                    a[j][i] -= g;
                }
                (None, Some(v)) | (Some(v), None) => {
                    let i = local[if pinned[x].is_none() { &x } else { &y }];
                    a[i][i] += g;
                    rhs[i] += g * v;
                    anchored = true;
                }
                (Some(_), Some(_)) => {}
            }
        }
        let solved = if anchored { gauss_solve(a, rhs) } else { None };
        match solved {
            Some(x) => {
                for (k, &i) in nodes.iter().enumerate() {
                    p[i] = x[k].clamp(0.0, 1.0);
                }
            }
            None => {
                let mut charge = 0.0;
                let mut volume = 0.0;
                for &i in nodes {
                    let v = prior[i].unwrap_or_else(|| {
                        warnings.push(format!("node '{}' is isolated with no initial pressure; using 0", c.ids[i]));
                        0.0
                    });
                    charge += c.cap[i] * v;
                    volume += c.cap[i];
                }
                let mean = if volume > 0.0 { charge / volume } else { 0.0 };
                for &i in nodes {
                    p[i] = mean;
                }
            }
        }
    }
    p
}

/// Steady-state pressures for fixed valve states. Valves missing from
/// `valve_states` keep their declared initial state; isolated nodes keep
/// their initial pressure.
pub fn solve_static(net: &Netlist, valve_states: &HashMap<String, bool>) -> Result<StaticSolution, EngineError> {
    let c = Compiled::new(net);
    let mut open: Vec<bool> = c.valves.iter().map(|v| v.initially_open).collect();
    for (id, &state) in valve_states {
        let i = *c.valve_index.get(id).ok_or_else(|| EngineError::UnknownValve(id.clone()))?;
        open[i] = state;
    }
    let covered: Vec<bool> = c.ports.iter().map(|p| p.covered).collect();
    let mut warnings = Vec::new();
    let p = solve_compiled(&c, &open, &covered, &vec![None; c.len()], &c.init, &mut warnings);
    Ok(StaticSolution {
        pressures: c.ids.iter().cloned().zip(p).collect(),
        warnings,
    })
}

/// Fixpoint of the valve/pressure iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiStatic {
    pub valves: IndexMap<String, bool>,
    pub pressures: IndexMap<String, f64>,
    pub warnings: Vec<String>,
}

impl QuasiStatic {
    pub fn level(&self, node: &str) -> Option<LogicLevel> {
        self.pressures.get(node).map(|&p| read_logic(p))
    }
}

/// Pressure used to drive a node at a given logic level.
pub fn drive_pressure(level: LogicLevel) -> f64 {
    match level {
        LogicLevel::One => 1.0,
        LogicLevel::Zero => 0.0,
        LogicLevel::Unknown => 0.5,
    }
}

/// Compiles a netlist once for repeated quasi-static evaluation.
#[derive(Debug, Clone)]
pub struct QuasiStaticSolver {
    c: Compiled,
}

impl QuasiStaticSolver {
    pub fn new(net: &Netlist) -> Self {
        QuasiStaticSolver { c: Compiled::new(net) }
    }

    /// Alternates static solves with single-threshold valve updates
    /// (open iff gate >= theta_open) until the valve states repeat.
    pub fn solve(&self, inputs: &IndexMap<String, LogicLevel>) -> Result<QuasiStatic, EngineError> {
        let pressures = inputs.iter().map(|(k, &l)| (k.clone(), drive_pressure(l))).collect();
        self.solve_driven(&pressures)
    }

    /// As [`solve`](Self::solve) with inputs pinned at arbitrary pressures.
    pub fn solve_driven(&self, inputs: &IndexMap<String, f64>) -> Result<QuasiStatic, EngineError> {
        let c = &self.c;
        let mut driven = vec![None; c.len()];
        for (id, &p) in inputs {
            let i = *c.index.get(id).ok_or_else(|| EngineError::UnknownNode(id.clone()))?;
            if c.fixed[i].is_some() {
                return Err(EngineError::RailStimulus(id.clone()));
            }
            driven[i] = Some(p.clamp(0.0, 1.0));
        }
        let covered: Vec<bool> = c.ports.iter().map(|p| p.covered).collect();
        let mut open: Vec<bool> = c.valves.iter().map(|v| v.initially_open).collect();
        let mut prior = c.init.clone();
        let mut warnings = Vec::new();
        let mut history = vec![open.clone()];
        let limit = 2 * c.valves.len() + 4;
        for _ in 0..limit {
            let p = solve_compiled(c, &open, &covered, &driven, &prior, &mut warnings);
            let next: Vec<bool> = c.valves.iter().map(|v| p[v.gate] >= v.theta_open).collect();
            if next == open {
                warnings.dedup();
                return Ok(QuasiStatic {
                    valves: c.valve_ids.iter().cloned().zip(open).collect(),
                    pressures: c.ids.iter().cloned().zip(p).collect(),
                    warnings,
                });
            }
            if let Some(k) = history.iter().position(|h| *h == next) {
                let cycle = history[k..]
                    .iter()
                    .map(|state| {
                        c.valve_ids
                            .iter()
                            .zip(state)
                            .filter(|(_, o)| **o)
                            .map(|(id, _)| id.clone())
                            .collect()
                    })
                    .collect();
                return Err(EngineError::Oscillation { cycle });
            }
            history.push(next.clone());
            open = next;
            prior = p.into_iter().map(Some).collect();
        }
        Err(EngineError::NoFixpoint { iterations: limit })
    }
}

/// One-shot quasi-static evaluation.
pub fn run_quasistatic(net: &Netlist, inputs: &IndexMap<String, LogicLevel>) -> Result<QuasiStatic, EngineError> {
    QuasiStaticSolver::new(net).solve(inputs)
}
