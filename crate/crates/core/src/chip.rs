//! Full FSM chip: input and clock buffers, a 2-bit register and the PLA.

use crate::netlist::{Netlist, Probe};
use crate::pla::{expand_pla, HolePattern, PlaError, PlaPorts};
use crate::stdcells::{expand_buf, expand_button, expand_dff, expand_not, ButtonHandle, CellError, CellParams, DffPorts};

/// External input bit.
pub const A_IN: &str = "A";
/// External clock (or button output).
pub const CLK_IN: &str = "CLK";
pub const S1: &str = "S1";
pub const S1N: &str = "S1n";
pub const S0: &str = "S0";
pub const S0N: &str = "S0n";
/// Buffered copy of A feeding the PLA.
pub const A_BUF: &str = "A.b";
/// Inverted A feeding the PLA.
pub const A_NEG: &str = "A.n";
/// Next-state outputs of the PLA, wired to the flip-flop D inputs.
pub const N1: &str = "N1";
pub const N0: &str = "N0";
pub const CLK_BUF: &str = "CLK.b";
pub const CLK_NEG: &str = "CLK.n";
/// Instance name of the clock button, when present.
pub const BUTTON: &str = "button";

#[derive(Debug, Clone, Default)]
pub struct ChipOptions {
    pub params: CellParams,
    /// Power-up state (S1, S0).
    pub init_state: Option<(bool, bool)>,
    /// Drive CLK from an on-chip push button instead of an external line.
    pub button_clock: bool,
}

#[derive(Debug, Clone)]
pub struct FsmChip {
    pub netlist: Netlist,
    pub pattern: HolePattern,
    pub button: Option<ButtonHandle>,
}

fn cell_err(e: impl Into<CellError>) -> PlaError {
    PlaError::Cell(e.into())
}

/// The 2-bit register with one shared clock inverter: 13 valves.
pub fn register(params: &CellParams, clk: &str, init: Option<(bool, bool)>) -> Result<Netlist, CellError> {
    let clkn = "reg.clkn";
    let mut net = expand_not("reg.ck", clk, clkn, params)?;
    for (name, d, q, qbar, bit) in [
        ("ff1", N1, S1, S1N, init.map(|s| s.0)),
        ("ff0", N0, S0, S0N, init.map(|s| s.1)),
    ] {
        let ports = DffPorts {
            d,
            clk,
            q,
            qbar,
            shared_clk_inv: Some(clkn),
        };
        net.union(&expand_dff(name, &ports, bit, params)?)?;
    }
    Ok(net)
}

/// Assembles buffers (4 valves), register (13) and PLA (18).
pub fn build_fsm_chip(pattern: &HolePattern, opts: &ChipOptions) -> Result<FsmChip, PlaError> {
    let p = &opts.params;
    let mut net = Netlist::new();
    net.set_meta("chip", "fsm");

    // A -> A.n -> A.b: the intermediate inverter output doubles as the An literal.
    net.union(&expand_not("abuf.a", A_IN, A_NEG, p).map_err(cell_err)?)?;
    net.union(&expand_not("abuf.b", A_NEG, A_BUF, p).map_err(cell_err)?)?;
    net.union(&expand_buf("ckbuf", CLK_IN, CLK_BUF, p).map_err(cell_err)?)?;
    net.union(&register(p, CLK_BUF, opts.init_state).map_err(cell_err)?)?;

    let ports = PlaPorts {
        literals: [S1, S1N, S0, S0N, A_BUF, A_NEG].map(str::to_string),
        outputs: [N1, N0].map(str::to_string),
        prefix: "pla".to_string(),
    };
    net.union(&expand_pla(pattern, &ports, p)?)?;

    let button = if opts.button_clock {
        let (frag, handle) = expand_button(BUTTON, CLK_IN, p).map_err(cell_err)?;
        net.union(&frag)?;
        Some(handle)
    } else {
        None
    };
    for id in [CLK_IN, A_IN, S1, S0, N1, N0] {
        net.add_probe(Probe::Node(id.to_string()))?;
    }
    Ok(FsmChip {
        netlist: net,
        pattern: pattern.clone(),
        button,
    })
}
