//! Valve-level check of a hole pattern against a transition table.

use rayon::prelude::*;

use crate::chip::{build_fsm_chip, ChipOptions, A_IN, CLK_IN, N0, N1, S0, S1};
use crate::engine::{Clock, LogicLevel, Simulator};
use crate::pla::HolePattern;
use crate::stdcells::CellParams;

use super::dsl::State;
use super::table::TransitionTable;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub period: f64,
    pub dt: f64,
    pub params: CellParams,
    /// Also search for the minimum passing clock period.
    pub search_period: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            period: 40.0,
            dt: 1e-3,
            params: CellParams::default(),
            search_period: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCheck {
    pub state: State,
    pub input: bool,
    pub expected: State,
    /// None when a state bit read UNKNOWN or the register failed to load.
    pub observed: Option<State>,
}

impl TransitionCheck {
    pub fn passed(&self) -> bool {
        self.observed == Some(self.expected)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub period: f64,
    pub checks: Vec<TransitionCheck>,
    pub min_period: Option<f64>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(TransitionCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TransitionCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

fn read_state(sim: &Simulator) -> Option<State> {
    let bit = |id| sim.level(id).and_then(LogicLevel::as_bit);
    Some(((bit(S1)? as State) << 1) | bit(S0)? as State)
}

/// Clock falls at P, 2P, ...; the register is forced to `state` through its
/// D inputs for the first edge, then the PLA computes the next state which
/// the second edge loads.
pub fn check_transition(
    pattern: &HolePattern,
    state: State,
    input: bool,
    period: f64,
    dt: f64,
    params: &CellParams,
) -> Option<State> {
    let opts = ChipOptions {
        params: *params,
        ..Default::default()
    };
    let chip = build_fsm_chip(pattern, &opts).ok()?;
    let mut sim = Simulator::new(&chip.netlist, dt).ok()?;
    sim.add_clock(CLK_IN, Clock::new(period, 0.5, period / 2.0).ok()?).ok()?;
    sim.set_drive(A_IN, Some(if input { 1.0 } else { 0.0 })).ok()?;
    let bit = |b: u8| if b == 1 { 1.0 } else { 0.0 };
    sim.set_drive(N1, Some(bit(state >> 1))).ok()?;
    sim.set_drive(N0, Some(bit(state & 1))).ok()?;
    sim.run_until(1.25 * period);
    sim.set_drive(N1, None).ok()?;
    sim.set_drive(N0, None).ok()?;
    let eps = (period / 50.0).max(2.0 * dt);
    sim.run_until(1.5 * period - eps);
    if read_state(&sim)? != state {
        return None;
    }
    sim.run_until(2.5 * period - eps);
    read_state(&sim)
}

fn run_checks(pattern: &HolePattern, table: &TransitionTable, period: f64, dt: f64, params: &CellParams) -> Vec<TransitionCheck> {
    (0..8usize)
        .into_par_iter()
        .map(|i| {
            let (state, input) = ((i >> 1) as State, i & 1 == 1);
            TransitionCheck {
                state,
                input,
                expected: table.next(state, input),
                observed: check_transition(pattern, state, input, period, dt, params),
            }
        })
        .collect()
}

const MAX_BRACKET_STEPS: usize = 8;
const BISECTIONS: usize = 10;

/// Smallest period (within the bisection resolution) at which all eight
/// transitions pass, or None if none passes below `start * 2^8`.
pub fn min_period(pattern: &HolePattern, table: &TransitionTable, start: f64, dt: f64, params: &CellParams) -> Option<f64> {
    let passes = |p: f64| run_checks(pattern, table, p, dt, params).iter().all(TransitionCheck::passed);
    let (mut lo, mut hi);
    if passes(start) {
        hi = start;
        lo = start / 2.0;
        let mut steps = 0;
        while passes(lo) {
            hi = lo;
            lo /= 2.0;
            steps += 1;
            if steps == MAX_BRACKET_STEPS || lo < 20.0 * dt {
                return Some(hi);
            }
        }
    } else {
        lo = start;
        hi = start * 2.0;
        let mut steps = 1;
        while !passes(hi) {
            if steps == MAX_BRACKET_STEPS {
                return None;
            }
            lo = hi;
            hi *= 2.0;
            steps += 1;
        }
    }
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Never errors: construction problems show up as failed transitions.
pub fn verify(pattern: &HolePattern, table: &TransitionTable, opts: &VerifyOptions) -> VerifyReport {
    let checks = run_checks(pattern, table, opts.period, opts.dt, &opts.params);
    let min_period = if opts.search_period {
        min_period(pattern, table, opts.period, opts.dt, &opts.params)
    } else {
        None
    };
    VerifyReport {
        period: opts.period,
        checks,
        min_period,
    }
}
