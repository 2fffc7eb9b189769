//! Liquid-handling plants (rotary mixer, dilution ladder) and their
//! co-simulation with a valve-level controller.

pub mod cosim;
pub mod ladder;
pub mod mixer;
pub mod pump;

use std::collections::BTreeMap;

use thiserror::Error;

pub use cosim::{dilution_chip, mixer_chip, run_embedded, CoSim, ControllerChip, Plant, Script, ScriptAction};
pub use ladder::{LadderTopology, LADDER_LINES};
pub use mixer::{MixerMode, MixerTopology};
pub use pump::PumpTracker;

/// Default number of pump cycles for complete mixing.
pub const N_MIX: usize = 30;
/// Default pumped volume per cycle, as a fraction of the ring volume.
pub const PUMP_Q: f64 = 1.0 / 20.0;

pub const SAMPLE: &str = "sample";
pub const BUFFER: &str = "buffer";
pub const R1: &str = "R1";
pub const R2: &str = "R2";

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidicsError {
    #[error("invalid mixer state {0:02b}")]
    InvalidState(u8),
    #[error("expected exactly one active control line, got {0}")]
    OneHot(usize),
    #[error("control line {line} out of range (ladder has {lines})")]
    LineRange { line: usize, lines: usize },
    #[error("bad plant config: {0}")]
    Config(String),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("no button on chip")]
    NoButton,
    #[error(transparent)]
    Cell(#[from] crate::stdcells::CellError),
    #[error(transparent)]
    Netlist(#[from] crate::netlist::NetlistError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error(transparent)]
    Pla(#[from] crate::pla::PlaError),
    #[error(transparent)]
    Fsmc(#[from] crate::fsmc::FsmcError),
}

/// Source label -> fraction.
pub type Composition = BTreeMap<String, f64>;

pub fn pure(source: &str) -> Composition {
    Composition::from([(source.to_string(), 1.0)])
}

/// Drops negligible entries and renormalizes so fractions sum to 1.
pub fn normalize(c: &mut Composition) {
    c.retain(|_, f| *f > 1e-15);
    let sum: f64 = c.values().sum();
    if sum > 0.0 {
        for f in c.values_mut() {
            *f /= sum;
        }
    }
}

/// Volume-weighted mix of compositions.
pub fn blend<'a>(parts: impl IntoIterator<Item = (&'a Composition, f64)>) -> Composition {
    let mut out = Composition::new();
    let mut total = 0.0;
    for (c, v) in parts {
        total += v;
        for (k, f) in c {
            *out.entry(k.clone()).or_default() += f * v;
        }
    }
    if total > 0.0 {
        for f in out.values_mut() {
            *f /= total;
        }
    }
    normalize(&mut out);
    out
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Compartment {
    pub id: String,
    pub volume: f64,
    pub composition: Composition,
}

impl Compartment {
    pub fn new(id: &str, volume: f64, composition: Composition) -> Self {
        Compartment {
            id: id.to_string(),
            volume,
            composition,
        }
    }

    pub fn fraction(&self, source: &str) -> f64 {
        self.composition.get(source).copied().unwrap_or(0.0)
    }

    pub fn is_normalized(&self) -> bool {
        let sum: f64 = self.composition.values().sum();
        (sum - 1.0).abs() <= SUM_TOL && self.composition.values().all(|f| (0.0..=1.0 + SUM_TOL).contains(f))
    }
}

/// One row per (compartment, source): `cycle compartment source fraction`.
pub fn history_tsv(history: &[(usize, Vec<Compartment>)]) -> String {
    let mut out = String::from("cycle\tcompartment\tsource\tfraction\n");
    for (cycle, comps) in history {
        for c in comps {
            for (src, f) in &c.composition {
                out += &format!("{cycle}\t{}\t{src}\t{f:.9}\n", c.id);
            }
        }
    }
    out
}
