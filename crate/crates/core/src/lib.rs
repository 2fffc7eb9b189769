//! Switch-level simulation and FSM-to-PLA compilation for pneumatic valve logic.
// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chip;
pub mod config;
pub mod engine;
pub mod fluidics;
pub mod fsmc;
pub mod netlist;
pub mod panel;
pub mod pla;
pub mod stdcells;

pub use netlist::{merge, parse_netlist, serialize_netlist, validate, Netlist, NetlistError};
pub use engine::{read_logic, EngineError, LogicLevel, Simulator, Waveform};
