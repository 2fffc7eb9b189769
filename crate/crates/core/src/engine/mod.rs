//! Quasi-static and timed simulation of valve netlists.

mod compiled;
mod statics;
mod stimulus;
mod timed;
mod vcd;

use std::fmt;

use thiserror::Error;

pub use statics::{drive_pressure, run_quasistatic, solve_static, QuasiStatic, QuasiStaticSolver, StaticSolution};
pub use stimulus::{parse_clock_spec, parse_stimulus, Clock, Drive, StimEvent, Stimulus};
pub use timed::{
    default_probes, max_stable_dt, run_timed, step_index, LogicEvent, Simulator, Waveform, STABILITY_GUARD,
};
pub use vcd::export_vcd;

/// Pressure at or above which a signal reads as ONE.
pub const LOGIC_HIGH: f64 = 0.7;
/// Pressure at or below which a signal reads as ZERO.
pub const LOGIC_LOW: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("unstable time step dt={dt}: must be <= {limit:.3e} (0.1 * c_min / g_max, and c / sum(g) per node)")]
    UnstableStep { dt: f64, limit: f64 },
    #[error("stimulus drives rail '{0}'")]
    RailStimulus(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("unknown valve '{0}'")]
    UnknownValve(String),
    #[error("oscillation detected: valve states cycle with period {}", cycle.len())]
    Oscillation {
        /// Open valves in each state of the cycle.
        cycle: Vec<Vec<String>>,
    },
    #[error("no fixpoint within {iterations} iterations")]
    NoFixpoint { iterations: usize },
    #[error("stimulus line {line}: {message}")]
    Stimulus { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicLevel {
    Zero,
    One,
    Unknown,
}

impl LogicLevel {
    pub fn from_bit(b: bool) -> Self {
        if b {
            LogicLevel::One
        } else {
            LogicLevel::Zero
        }
    }

    pub fn as_bit(self) -> Option<bool> {
        match self {
            LogicLevel::Zero => Some(false),
            LogicLevel::One => Some(true),
            LogicLevel::Unknown => None,
        }
    }
}

impl fmt::Display for LogicLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogicLevel::Zero => "0",
            LogicLevel::One => "1",
            LogicLevel::Unknown => "x",
        })
    }
}

pub fn read_logic(p: f64) -> LogicLevel {
    if p >= LOGIC_HIGH {
        LogicLevel::One
    } else if p <= LOGIC_LOW {
        LogicLevel::Zero
    } else {
        LogicLevel::Unknown
    }
}
