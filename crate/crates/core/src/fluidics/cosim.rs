//! Closed loop: the valve-level controller runs in the timed engine, the
//! ring-oscillator taps clock the pump, and each completed pump cycle moves
//! the plant one step under the controller's current outputs.

use crate::chip::{build_fsm_chip, ChipOptions, A_IN, CLK_IN, S0, S0N, S1, S1N};
use crate::engine::{step_index, Clock, LogicLevel, Simulator, Waveform};
use crate::fsmc::{builtin_program, compile};
use crate::netlist::{Netlist, Probe};
use crate::stdcells::{expand_nand, expand_not, expand_ring_osc, ButtonHandle, CellParams};

use super::{Compartment, FluidicsError, LadderTopology, MixerMode, MixerTopology, PumpTracker};

pub const PUMP_TAPS: [&str; 3] = ["pump.p0", "pump.p1", "pump.p2"];
/// Default dilution clock period: comfortably more than N_MIX pump cycles
/// of a default 5-ring per state.
pub const DILUTION_CLOCK: f64 = 240.0;

/// A controller netlist plus the names the plant binds to.
#[derive(Debug, Clone)]
pub struct ControllerChip {
    pub netlist: Netlist,
    pub initial_state: u8,
    pub taps: [String; 3],
    /// One-hot control lines, if the chip decodes them.
    pub lines: Vec<String>,
    pub button: Option<ButtonHandle>,
    pub clock: Option<Clock>,
}

fn pump(net: &mut Netlist, p: &CellParams) -> Result<[String; 3], FluidicsError> {
    net.union(&expand_ring_osc("pump", 5, &PUMP_TAPS, p)?)?;
    for t in PUMP_TAPS {
        net.add_probe(Probe::Node(t.into()))?;
    }
    Ok(PUMP_TAPS.map(str::to_string))
}

fn program_chip(name: &str, p: &CellParams, button: bool) -> Result<(Netlist, u8, Option<ButtonHandle>, Vec<(String, u8)>), FluidicsError> {
    let compiled = compile(builtin_program(name).expect("bundled program"))?;
    let init = compiled.diagram.initial;
    let opts = ChipOptions {
        params: *p,
        init_state: Some((init & 2 != 0, init & 1 != 0)),
        button_clock: button,
    };
    let chip = build_fsm_chip(&compiled.pattern, &opts)?;
    let outputs = compiled.diagram.outputs.into_iter().collect();
    Ok((chip.netlist, init, chip.button, outputs))
}

/// Mixer controller: FSM chip clocked by the on-chip button, plus the pump.
pub fn mixer_chip(p: &CellParams) -> Result<ControllerChip, FluidicsError> {
    let (mut net, initial_state, button, _) = program_chip("mixer", p, true)?;
    let taps = pump(&mut net, p)?;
    Ok(ControllerChip {
        netlist: net,
        initial_state,
        taps,
        lines: Vec::new(),
        button,
        clock: None,
    })
}

/// Dilution controller: counter FSM on an external clock, a NAND2+NOT
/// decoder per Moore output, plus the pump.
pub fn dilution_chip(p: &CellParams, clock_period: f64) -> Result<ControllerChip, FluidicsError> {
    let (mut net, initial_state, _, outputs) = program_chip("dilution", p, false)?;
    let mut lines = Vec::new();
    for (name, state) in outputs {
        let hi = if state & 2 != 0 { S1 } else { S1N };
        let lo = if state & 1 != 0 { S0 } else { S0N };
        let nand = format!("dec.{name}.n");
        net.union(&expand_nand(&format!("dec.{name}.a"), &[hi, lo], &nand, p)?)?;
        net.union(&expand_not(&format!("dec.{name}.b"), &nand, &name, p)?)?;
        net.add_probe(Probe::Node(name.clone()))?;
        lines.push(name);
    }
    let taps = pump(&mut net, p)?;
    Ok(ControllerChip {
        netlist: net,
        initial_state,
        taps,
        lines,
        button: None,
        clock: Some(Clock::new(clock_period, 0.5, clock_period / 2.0)?),
    })
}

/// What the plant sees when a pump cycle completes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlSample {
    pub state: Option<u8>,
    pub lines: Vec<Option<bool>>,
}

pub trait Plant {
    /// Applies one pump cycle. Returns false when the controller outputs
    /// were not usable (UNKNOWN bits, one-hot violation) and nothing moved.
    fn pump_cycle(&mut self, ctl: &ControlSample) -> bool;
    fn compartments(&self) -> Vec<Compartment>;
}

impl Plant for MixerTopology {
    fn pump_cycle(&mut self, ctl: &ControlSample) -> bool {
        match ctl.state.map(MixerMode::from_state) {
            Some(Ok(mode)) => {
                MixerTopology::pump_cycle(self, mode);
                true
            }
            _ => false,
        }
    }

    fn compartments(&self) -> Vec<Compartment> {
        self.halves().to_vec()
    }
}

impl Plant for LadderTopology {
    fn pump_cycle(&mut self, ctl: &ControlSample) -> bool {
        let Some(lines) = ctl.lines.iter().copied().collect::<Option<Vec<bool>>>() else {
            return false;
        };
        match LadderTopology::one_hot(&lines) {
            Ok(k) => LadderTopology::pump_cycle(self, k).is_ok(),
            Err(_) => false,
        }
    }

    fn compartments(&self) -> Vec<Compartment> {
        self.rungs.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptAction {
    Press,
    Release,
    End,
}

/// Timed button actions, `time<TAB>press|release|end` per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Script {
    pub actions: Vec<(f64, ScriptAction)>,
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, FluidicsError> {
        let mut actions = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| FluidicsError::Script { line: i + 1, message };
            let mut it = line.split_whitespace();
            let (Some(t), Some(a), None) = (it.next(), it.next(), it.next()) else {
                return Err(err(format!("expected '<time> <action>', got '{line}'")));
            };
            let t: f64 = t.parse().map_err(|_| err(format!("bad time '{t}'")))?;
            if !t.is_finite() || t < 0.0 || t < last {
                return Err(err(format!("time {t} is negative or out of order")));
            }
            last = t;
            let action = match a {
                "press" => ScriptAction::Press,
                "release" => ScriptAction::Release,
                "end" => ScriptAction::End,
                _ => return Err(err(format!("unknown action '{a}'"))),
            };
            actions.push((t, action));
        }
        Ok(Script { actions })
    }

    /// Explicit `end`, else the last action plus `tail`.
    pub fn end_time(&self, tail: f64) -> f64 {
        match self.actions.iter().find(|(_, a)| *a == ScriptAction::End) {
            Some((t, _)) => *t,
            None => self.actions.last().map_or(tail, |(t, _)| t + tail),
        }
    }
}

/// Full mixer run: fill from R1, left half from R2, ring from R2, mix.
/// The FSM advances on each release. Presses shorter than about 3 time
/// units do not get through the button pull-up and clock buffer.
pub const DEFAULT_MIXER_SCRIPT: &str = "\
# time action
150 press
160 release
240 press
250 release
400 press
410 release
660 end
";

pub struct CoSim<P: Plant> {
    pub sim: Simulator,
    pub chip: ControllerChip,
    pub plant: P,
    pub tracker: PumpTracker,
    /// (pump cycle, compartments) after every applied cycle, starting at 0.
    pub history: Vec<(usize, Vec<Compartment>)>,
    /// Pump cycles the plant could not use.
    pub idle_cycles: usize,
    /// Applied pump cycles per FSM state.
    pub cycles_in_state: [usize; 4],
    taps: [usize; 3],
    lines: Vec<usize>,
    state_nodes: [usize; 2],
}

impl<P: Plant> CoSim<P> {
    pub fn new(chip: ControllerChip, plant: P, dt: f64) -> Result<Self, FluidicsError> {
        let mut sim = Simulator::new(&chip.netlist, dt)?;
        sim.set_drive(A_IN, Some(0.0))?;
        if let Some(clock) = chip.clock {
            sim.add_clock(CLK_IN, clock)?;
        }
        let idx = |sim: &Simulator, id: &str| {
            sim.node_index(id)
                .ok_or_else(|| crate::engine::EngineError::UnknownNode(id.to_string()))
        };
        let taps = [idx(&sim, &chip.taps[0])?, idx(&sim, &chip.taps[1])?, idx(&sim, &chip.taps[2])?];
        let lines = chip.lines.iter().map(|l| idx(&sim, l)).collect::<Result<_, _>>()?;
        let state_nodes = [idx(&sim, S1)?, idx(&sim, S0)?];
        let history = vec![(0, plant.compartments())];
        Ok(CoSim {
            sim,
            chip,
            plant,
            tracker: PumpTracker::new(),
            history,
            idle_cycles: 0,
            cycles_in_state: [0; 4],
            taps,
            lines,
            state_nodes,
        })
    }

    fn bit(&self, i: usize) -> Option<bool> {
        LogicLevel::as_bit(crate::engine::read_logic(self.sim.pressure_at(i)))
    }

    /// Register state read from S1/S0, None if either is UNKNOWN.
    pub fn state(&self) -> Option<u8> {
        Some(((self.bit(self.state_nodes[0])? as u8) << 1) | self.bit(self.state_nodes[1])? as u8)
    }

    pub fn control(&self) -> ControlSample {
        ControlSample {
            state: self.state(),
            lines: self.lines.iter().map(|&i| self.bit(i)).collect(),
        }
    }

    pub fn step(&mut self) {
        self.sim.step();
        let phases = self.taps.map(|i| self.bit(i));
        if self.tracker.sample(phases) {
            let ctl = self.control();
            if self.plant.pump_cycle(&ctl) {
                if let Some(s) = ctl.state {
                    self.cycles_in_state[s as usize] += 1;
                }
                self.history.push((self.tracker.cycles, self.plant.compartments()));
            } else {
                self.idle_cycles += 1;
            }
        }
    }

    /// Steps until the step index of `t` (the same rounding as stimulus
    /// events).
    pub fn run_until(&mut self, t: f64) {
        let target = step_index(t, self.sim.dt());
        while self.sim.steps() < target {
            self.step();
        }
    }

    pub fn set_button(&mut self, covered: bool) -> Result<(), FluidicsError> {
        let port = self
            .chip
            .button
            .as_ref()
            .ok_or(FluidicsError::NoButton)?
            .port
            .clone();
        self.sim.set_covered(&port, covered)?;
        Ok(())
    }

    pub fn button_covered(&self) -> Option<bool> {
        self.chip.button.as_ref().and_then(|b| self.sim.port_covered(&b.port))
    }

    /// Applies the script's actions at their times and runs to `t_end`.
    pub fn run_script(&mut self, script: &Script, t_end: f64) -> Result<(), FluidicsError> {
        for &(t, action) in &script.actions {
            if t > t_end {
                break;
            }
            self.run_until(t);
            match action {
                ScriptAction::Press => self.set_button(true)?,
                ScriptAction::Release => self.set_button(false)?,
                ScriptAction::End => break,
            }
        }
        self.run_until(t_end);
        Ok(())
    }
}

/// Scripted co-simulation run; returns the finished session and the
/// controller waveform.
pub fn run_embedded<P: Plant>(
    chip: ControllerChip,
    plant: P,
    script: &Script,
    t_end: f64,
    dt: f64,
    stride: u64,
) -> Result<(CoSim<P>, Waveform), FluidicsError> {
    let probes = chip.netlist.probes().to_vec();
    let mut co = CoSim::new(chip, plant, dt)?;
    co.sim.record(&probes, stride)?;
    co.run_script(script, t_end)?;
    let wave = co.sim.take_waveform().expect("recording was enabled");
    Ok((co, wave))
}
