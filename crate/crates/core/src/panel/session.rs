use crate::config::{EngineConfig, PlantConfig, Topology};
use crate::engine::step_index;
use crate::fluidics::{dilution_chip, mixer_chip, CoSim, ControllerChip, FluidicsError, LadderTopology, MixerTopology, Plant, Script, ScriptAction};
use crate::fsmc::state_label;

use super::protocol::{Command, Layout, Message, Placed, Point, Snapshot};

pub const PROFILES: [&str; 2] = ["mixer", "dilution"];

enum Running {
    Mixer(CoSim<MixerTopology>),
    Ladder(CoSim<LadderTopology>),
}

macro_rules! with_cosim {
    ($r:expr, $c:ident => $body:expr) => {
        match $r {
            Running::Mixer($c) => $body,
            Running::Ladder($c) => $body,
        }
    };
}

/// Builds the controller and plant for a profile name.
pub fn load_profile(name: &str, cfg: &EngineConfig) -> Result<SessionSim, FluidicsError> {
    let p = cfg.cell_params();
    let inner = match name {
        "mixer" => {
            let plant = PlantConfig::named(Topology::Mixer);
            Running::Mixer(CoSim::new(mixer_chip(&p)?, plant.mixer(), cfg.dt)?)
        }
        "dilution" => {
            let plant = PlantConfig::named(Topology::Ladder);
            Running::Ladder(CoSim::new(dilution_chip(&p, plant.clock_period)?, plant.ladder(), cfg.dt)?)
        }
        other => return Err(FluidicsError::Config(format!("unknown chip profile '{other}'"))),
    };
    Ok(SessionSim {
        profile: name.to_string(),
        inner,
    })
}

pub struct SessionSim {
    profile: String,
    inner: Running,
}

impl SessionSim {
    pub fn chip(&self) -> &ControllerChip {
        with_cosim!(&self.inner, c => &c.chip)
    }

    pub fn run_until(&mut self, t: f64) {
        with_cosim!(&mut self.inner, c => c.run_until(t))
    }

    pub fn set_button(&mut self, covered: bool) -> Result<(), FluidicsError> {
        with_cosim!(&mut self.inner, c => c.set_button(covered))
    }

    pub fn compartments(&self) -> Vec<crate::fluidics::Compartment> {
        with_cosim!(&self.inner, c => c.plant.compartments())
    }

    fn snapshot(&self, tick: u64, running: bool) -> Snapshot {
        with_cosim!(&self.inner, c => Snapshot {
            profile: self.profile.clone(),
            sim_time: c.sim.time(),
            tick,
            running,
            fsm_state: c.state().map(state_label),
            valves: c.sim.valve_states().map(|(id, open)| (id.to_string(), open)).collect(),
            probes: c
                .chip
                .netlist
                .probes()
                .iter()
                .filter_map(|p| Some((p.name().to_string(), c.sim.pressure(p.name())?)))
                .collect(),
            plant: c.plant.compartments(),
            pump_cycles: c.tracker.cycles,
            button_covered: c.button_covered(),
        })
    }
}

/// Deterministic grid: one column per instance prefix, probes along the top.
pub fn layout(chip: &ControllerChip) -> Layout {
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<usize> = Vec::new();
    let mut valves = Vec::new();
    for v in chip.netlist.valves() {
        let group = v.id.split('.').next().unwrap_or(&v.id).to_string();
        let col = columns.iter().position(|g| *g == group).unwrap_or_else(|| {
            columns.push(group);
            rows.push(0);
            columns.len() - 1
        });
        valves.push(Placed {
            id: v.id.clone(),
            x: 40.0 + 60.0 * col as f64,
            y: 80.0 + 30.0 * rows[col] as f64,
        });
        rows[col] += 1;
    }
    let probes = chip
        .netlist
        .probes()
        .iter()
        .enumerate()
        .map(|(i, p)| Placed {
            id: p.name().to_string(),
            x: 40.0 + 60.0 * i as f64,
            y: 30.0,
        })
        .collect();
    let button = chip.button.as_ref().map(|_| Point { x: 20.0, y: 30.0 });
    Layout { valves, probes, button }
}

/// One panel session. Time advances in whole ticks so a replay that sends
/// the same commands at the same tick counts reproduces a scripted run.
pub struct Session {
    pub config: EngineConfig,
    sim: Option<SessionSim>,
    pub running: bool,
    pub tick: u64,
}

impl Session {
    pub fn new(config: EngineConfig) -> Self {
        Session {
            config,
            sim: None,
            running: false,
            tick: 0,
        }
    }

    pub fn sim(&self) -> Option<&SessionSim> {
        self.sim.as_ref()
    }

    pub fn snapshot(&self) -> Option<Snapshot> {
        self.sim.as_ref().map(|s| s.snapshot(self.tick, self.running))
    }

    fn snap(&self) -> Vec<Message> {
        self.snapshot().map(Message::Snapshot).into_iter().collect()
    }

    /// Advances one tick of simulated time.
    pub fn advance(&mut self) -> Vec<Message> {
        let Some(sim) = self.sim.as_mut() else {
            return Vec::new();
        };
        self.tick += 1;
        sim.run_until(self.tick as f64 * self.config.tick);
        self.snap()
    }

    pub fn handle(&mut self, cmd: Command) -> Vec<Message> {
        if !matches!(cmd, Command::Load { .. }) && self.sim.is_none() {
            return vec![Message::error("no chip loaded")];
        }
        match cmd {
            Command::Load { profile } => match load_profile(&profile, &self.config) {
                Ok(sim) => {
                    let layout = layout(sim.chip());
                    self.sim = Some(sim);
                    self.running = false;
                    self.tick = 0;
                    let mut out = vec![Message::Layout { profile, layout }];
                    out.extend(self.snap());
                    out
                }
                Err(e) => {
                    self.sim = None;
                    self.running = false;
                    self.tick = 0;
                    vec![Message::error(e.to_string())]
                }
            },
            Command::Reset => {
                let profile = self.sim.as_ref().map(|s| s.profile.clone()).unwrap_or_default();
                let mut out = self.handle(Command::Load { profile });
                out.retain(|m| !matches!(m, Message::Layout { .. }));
                out
            }
            Command::Start => {
                self.running = true;
                self.snap()
            }
            Command::Pause => {
                self.running = false;
                self.snap()
            }
            Command::PressButton | Command::ReleaseButton => {
                let covered = cmd == Command::PressButton;
                match self.sim.as_mut().map(|s| s.set_button(covered)) {
                    Some(Err(e)) => vec![Message::error(e.to_string())],
                    _ => self.snap(),
                }
            }
            Command::Step { n } => {
                let mut out = Vec::new();
                for _ in 0..n {
                    out = self.advance();
                }
                if out.is_empty() {
                    out = self.snap();
                }
                out
            }
            Command::Snapshot => self.snap(),
        }
    }
}

/// Turns a button script into session commands on the tick grid. Action
/// times are rounded down to whole ticks.
pub fn script_commands(script: &Script, tick: f64, t_end: f64) -> Vec<Command> {
    let mut out = Vec::new();
    let mut at = 0u64;
    let mut goto = |t: f64, out: &mut Vec<Command>| {
        let target = (t / tick + 1e-9).floor() as u64;
        if target > at {
            out.push(Command::Step { n: target - at });
            at = target;
        }
    };
    for &(t, action) in &script.actions {
        if t > t_end {
            break;
        }
        goto(t, &mut out);
        match action {
            ScriptAction::Press => out.push(Command::PressButton),
            ScriptAction::Release => out.push(Command::ReleaseButton),
            ScriptAction::End => break,
        }
    }
    goto(t_end, &mut out);
    out
}

/// True when every script time falls on the tick grid at the engine's
/// step resolution, so replay and a direct run apply actions at the same
/// steps.
pub fn script_on_grid(script: &Script, tick: f64, dt: f64) -> bool {
    script.actions.iter().all(|&(t, _)| {
        let k = (t / tick + 1e-9).floor();
        step_index(k * tick, dt) == step_index(t, dt)
    })
}
