//! Shared fixtures for the benchmarks.

use pneuma_core::fsmc::compile;
use pneuma_core::netlist::{Netlist, Probe};
use pneuma_core::pla::HolePattern;
use pneuma_core::stdcells::{expand_ring_osc, CellParams};

pub const HOLD: &str = include_str!("../../core/programs/hold.fsm");

pub fn ring5() -> Netlist {
    let taps = ["p0", "p1", "p2"];
    let mut net = expand_ring_osc("osc", 5, &taps, &CellParams::default()).expect("ring");
    for t in taps {
        net.add_probe(Probe::Node(t.into())).expect("probe");
    }
    net
}

pub fn hold_pattern() -> HolePattern {
    compile(HOLD).expect("hold compiles").pattern
}
