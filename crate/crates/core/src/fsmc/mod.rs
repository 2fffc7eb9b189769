//! FSM compiler: state-diagram text to PLA membrane, plus valve-level verify.

pub mod dsl;
pub mod fit;
pub mod minimize;
pub mod table;
pub mod verify;

use thiserror::Error;

use crate::pla::{encode_membrane, HolePattern, PlaShape};

pub use dsl::{parse_fsm, state_label, FsmError, FsmErrorKind, State, StateDiagram};
pub use fit::{fit_pla, CapacityError};
pub use minimize::{derive_sop, minimize, Cube, SopEquations};
pub use table::{to_table, TransitionTable};
pub use verify::{check_transition, min_period, verify, TransitionCheck, VerifyOptions, VerifyReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FsmcError {
    #[error(transparent)]
    Parse(#[from] FsmError),
    #[error("PLA capacity exceeded: {0}")]
    Capacity(#[from] CapacityError),
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub diagram: StateDiagram,
    pub table: TransitionTable,
    pub sop: SopEquations,
    pub pattern: HolePattern,
    pub membrane: String,
}

pub fn compile(text: &str) -> Result<Compiled, FsmcError> {
    let diagram = parse_fsm(text)?;
    let table = to_table(&diagram);
    let sop = derive_sop(&table);
    let pattern = fit_pla(&sop, &PlaShape::DEVICE)?;
    let membrane = encode_membrane(&pattern);
    Ok(Compiled {
        diagram,
        table,
        sop,
        pattern,
        membrane,
    })
}

/// Bundled example programs by name.
pub fn builtin_program(name: &str) -> Option<&'static str> {
    Some(match name {
        "twoloop" => include_str!("../../programs/twoloop.fsm"),
        "counter" => include_str!("../../programs/counter.fsm"),
        "hold" => include_str!("../../programs/hold.fsm"),
        "phase" => include_str!("../../programs/phase.fsm"),
        "mixer" => include_str!("../../programs/mixer.fsm"),
        "dilution" => include_str!("../../programs/dilution.fsm"),
        _ => return None,
    })
}

pub const BUILTIN_PROGRAMS: [&str; 6] = ["twoloop", "counter", "hold", "phase", "mixer", "dilution"];
