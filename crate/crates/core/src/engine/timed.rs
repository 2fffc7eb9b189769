use indexmap::IndexMap;

use super::compiled::Compiled;
use super::stimulus::{Clock, Drive, StimEvent, Stimulus};
use super::{read_logic, EngineError, LogicLevel};
use crate::netlist::{Netlist, Probe};

/// Guard factor in `dt <= GUARD * c_min / g_max`.
pub const STABILITY_GUARD: f64 = 0.1;

/// Largest step accepted for a netlist: the global guard, tightened where a
/// single node's total conductance would break the convex-update property.
pub fn max_stable_dt(net: &Netlist) -> f64 {
    stable_limit(&Compiled::new(net))
}

fn stable_limit(c: &Compiled) -> f64 {
    let mut g_sum = vec![0.0; c.len()];
    let mut g_max: f64 = 0.0;
    let mut add = |a: usize, b: usize, g: f64| {
        g_sum[a] += g;
        g_sum[b] += g;
        g_max = g_max.max(g);
    };
    for l in &c.channels {
        add(l.a, l.b, l.g);
    }
    for p in &c.ports {
        add(p.link.a, p.link.b, p.link.g);
    }
    for v in &c.valves {
        add(v.a, v.b, v.g);
    }
    let free = (0..c.len()).filter(|&i| c.fixed[i].is_none());
    let c_min = free.clone().map(|i| c.cap[i]).fold(f64::INFINITY, f64::min);
    let mut limit = if g_max > 0.0 {
        STABILITY_GUARD * c_min / g_max
    } else {
        f64::INFINITY
    };
    for i in free {
        if g_sum[i] > 0.0 {
            limit = limit.min(c.cap[i] / g_sum[i]);
        }
    }
    limit
}

/// Logic-level change on a recorded signal. Valves report open as ONE.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicEvent {
    pub step: u64,
    pub time: f64,
    pub signal: String,
    pub old: LogicLevel,
    pub new: LogicLevel,
}

/// Recorded run. Sample `k` is taken at step `start_step + k * stride`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub dt: f64,
    pub stride: u64,
    pub start_step: u64,
    pub signals: IndexMap<String, Vec<f64>>,
    pub valve_series: IndexMap<String, Vec<bool>>,
    /// Changes detected at every step, not only at sample points.
    pub events: Vec<LogicEvent>,
    /// Level of every recorded signal at the first sample.
    pub initial: IndexMap<String, LogicLevel>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.signals
            .values()
            .map(Vec::len)
            .chain(self.valve_series.values().map(Vec::len))
            .next()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step_of(&self, sample: usize) -> u64 {
        self.start_step + sample as u64 * self.stride
    }

    pub fn time(&self, sample: usize) -> f64 {
        self.step_of(sample) as f64 * self.dt
    }

    /// Last sample taken at or before time `t`.
    pub fn sample_at(&self, t: f64) -> Option<usize> {
        let step = (t / self.dt + 1e-9).floor();
        if step < self.start_step as f64 || self.is_empty() {
            return None;
        }
        let k = ((step as u64 - self.start_step) / self.stride) as usize;
        Some(k.min(self.len() - 1))
    }

    pub fn pressure_at(&self, signal: &str, t: f64) -> Option<f64> {
        let k = self.sample_at(t)?;
        self.signals.get(signal).map(|s| s[k])
    }

    pub fn level_at(&self, signal: &str, t: f64) -> Option<LogicLevel> {
        self.pressure_at(signal, t).map(read_logic)
    }

    pub fn final_pressure(&self, signal: &str) -> Option<f64> {
        self.signals.get(signal).and_then(|s| s.last().copied())
    }

    /// Times at which `signal` became ONE.
    pub fn rising_edges(&self, signal: &str) -> Vec<f64> {
        self.events_for(signal)
            .filter(|e| e.new == LogicLevel::One)
            .map(|e| e.time)
            .collect()
    }

    /// Mean spacing of rising edges after time `after`; needs two edges.
    pub fn mean_period(&self, signal: &str, after: f64) -> Option<f64> {
        let edges: Vec<f64> = self.rising_edges(signal).into_iter().filter(|&t| t > after).collect();
        if edges.len() < 2 {
            return None;
        }
        Some((edges[edges.len() - 1] - edges[0]) / (edges.len() - 1) as f64)
    }

    pub fn events_for<'a>(&'a self, signal: &'a str) -> impl Iterator<Item = &'a LogicEvent> + 'a {
        self.events.iter().filter(move |e| e.signal == signal)
    }
}

#[derive(Debug, Clone)]
struct Recorder {
    stride: u64,
    start_step: u64,
    nodes: Vec<(String, usize)>,
    valves: Vec<(String, usize)>,
    series: Vec<Vec<f64>>,
    valve_series: Vec<Vec<bool>>,
    node_levels: Vec<LogicLevel>,
    valve_levels: Vec<bool>,
    events: Vec<LogicEvent>,
    initial: IndexMap<String, LogicLevel>,
}

fn valve_level(open: bool) -> LogicLevel {
    if open {
        LogicLevel::One
    } else {
        LogicLevel::Zero
    }
}

/// Timed simulation session. Owns all mutable state; single-threaded.
#[derive(Debug, Clone)]
pub struct Simulator {
    c: Compiled,
    dt: f64,
    step: u64,
    p: Vec<f64>,
    dp: Vec<f64>,
    open: Vec<bool>,
    covered: Vec<bool>,
    driven: Vec<Option<f64>>,
    clocks: Vec<(usize, Clock)>,
    max_rate: f64,
    recorder: Option<Recorder>,
}

impl Simulator {
    pub fn new(net: &Netlist, dt: f64) -> Result<Self, EngineError> {
        let c = Compiled::new(net);
        let limit = stable_limit(&c);
        if !(dt.is_finite() && dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(EngineError::UnstableStep { dt, limit });
        }
        let n = c.len();
        let mut sim = Simulator {
            p: c.initial_pressures(),
            dp: vec![0.0; n],
            open: c.valves.iter().map(|v| v.initially_open).collect(),
            covered: c.ports.iter().map(|p| p.covered).collect(),
            driven: vec![None; n],
            clocks: Vec::new(),
            max_rate: f64::INFINITY,
            recorder: None,
            dt,
            step: 0,
            c,
        };
        sim.update_valves();
        Ok(sim)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.c.index.get(id).copied()
    }

    pub fn pressure(&self, id: &str) -> Option<f64> {
        self.node_index(id).map(|i| self.p[i])
    }

    pub fn pressure_at(&self, index: usize) -> f64 {
        self.p[index]
    }

    pub fn level(&self, id: &str) -> Option<LogicLevel> {
        self.pressure(id).map(read_logic)
    }

    pub fn valve_open(&self, id: &str) -> Option<bool> {
        self.c.valve_index.get(id).map(|&i| self.open[i])
    }

    pub fn valve_states(&self) -> impl Iterator<Item = (&str, bool)> {
        self.c.valve_ids.iter().map(String::as_str).zip(self.open.iter().copied())
    }

    pub fn port_states(&self) -> impl Iterator<Item = (&str, bool)> {
        self.c.port_ids.iter().map(String::as_str).zip(self.covered.iter().copied())
    }

    pub fn port_covered(&self, id: &str) -> Option<bool> {
        self.c.port_index.get(id).map(|&i| self.covered[i])
    }

    /// Largest |dp/dt| over free nodes during the last step.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    fn free_index(&self, id: &str) -> Result<usize, EngineError> {
        let i = self
            .node_index(id)
            .ok_or_else(|| EngineError::UnknownNode(id.to_string()))?;
        if self.c.fixed[i].is_some() {
            return Err(EngineError::RailStimulus(id.to_string()));
        }
        Ok(i)
    }

    /// Pins a node at a pressure, or releases it with `None`.
    pub fn set_drive(&mut self, node: &str, pressure: Option<f64>) -> Result<(), EngineError> {
        let i = self.free_index(node)?;
        if let Some(v) = pressure {
            if !(0.0..=1.0).contains(&v) {
                return Err(EngineError::Invalid(format!("drive pressure {v} outside [0, 1]")));
            }
            self.p[i] = v;
        }
        self.clocks.retain(|(n, _)| *n != i);
        self.driven[i] = pressure;
        Ok(())
    }

    pub fn set_covered(&mut self, port: &str, covered: bool) -> Result<(), EngineError> {
        let i = *self
            .c
            .port_index
            .get(port)
            .ok_or_else(|| EngineError::UnknownNode(port.to_string()))?;
        self.covered[i] = covered;
        Ok(())
    }

    /// Attaches a clock, replacing any drive on the node.
    pub fn add_clock(&mut self, node: &str, clock: Clock) -> Result<(), EngineError> {
        let i = self.free_index(node)?;
        self.clocks.retain(|(n, _)| *n != i);
        self.clocks.push((i, clock));
        self.apply_clocks();
        Ok(())
    }

    /// Applies one stimulus event now. Port targets are covered for drive
    /// levels >= 0.5 and uncovered otherwise.
    pub fn apply(&mut self, event: &StimEvent) -> Result<(), EngineError> {
        if self.c.port_index.contains_key(&event.target) {
            let covered = matches!(event.drive, Drive::Level(v) if v >= 0.5);
            return self.set_covered(&event.target, covered);
        }
        match event.drive {
            Drive::Level(v) => self.set_drive(&event.target, Some(v)),
            Drive::Release => self.set_drive(&event.target, None),
        }
    }

    fn apply_clocks(&mut self) {
        let t = self.time();
        for &(i, clk) in &self.clocks {
            let v = if clk.high(t) { 1.0 } else { 0.0 };
            self.driven[i] = Some(v);
            self.p[i] = v;
        }
    }

    fn update_valves(&mut self) {
        for (v, open) in self.c.valves.iter().zip(self.open.iter_mut()) {
            let gate = self.p[v.gate];
            if *open {
                if gate <= v.theta_close {
                    *open = false;
                }
            } else if gate >= v.theta_open {
                *open = true;
            }
        }
    }

    /// Advances one explicit-Euler step, then updates valves with hysteresis.
    pub fn step(&mut self) {
        let (c, p, dp) = (&self.c, &mut self.p, &mut self.dp);
        for i in 0..c.len() {
            if let Some(v) = c.fixed[i].or(self.driven[i]) {
                p[i] = v;
            }
        }
        dp.fill(0.0);
        c.for_each_conducting(&self.open, &self.covered, |a, b, g| {
            let f = g * (p[b] - p[a]);
            dp[a] += f;
            dp[b] -= f;
        });
        let mut rate: f64 = 0.0;
        for i in 0..c.len() {
            if c.fixed[i].is_none() && self.driven[i].is_none() {
                let d = dp[i] / c.cap[i];
                rate = rate.max(d.abs());
                p[i] = (p[i] + self.dt * d).clamp(0.0, 1.0);
            }
        }
        self.max_rate = rate;
        self.step += 1;
        self.apply_clocks();
        self.update_valves();
        self.observe();
    }

    pub fn run_steps(&mut self, n: u64) {
        for _ in 0..n {
            self.step();
        }
    }

    /// Steps until the clock reaches `t` (rounded up to a whole step).
    pub fn run_until(&mut self, t: f64) {
        let target = step_index(t, self.dt);
        while self.step < target {
            self.step();
        }
    }

    /// Starts recording node and valve probes, one sample every `stride`
    /// steps beginning now. Replaces any earlier recording.
    pub fn record(&mut self, probes: &[Probe], stride: u64) -> Result<(), EngineError> {
        let mut nodes = Vec::new();
        let mut valves = Vec::new();
        for probe in probes {
            match probe {
                Probe::Node(id) => nodes.push((id.clone(), self.node_index(id).ok_or_else(|| EngineError::UnknownNode(id.clone()))?)),
                Probe::Valve(id) => valves.push((
                    id.clone(),
                    *self.c.valve_index.get(id).ok_or_else(|| EngineError::UnknownValve(id.clone()))?,
                )),
            }
        }
        let node_levels: Vec<LogicLevel> = nodes.iter().map(|(_, i)| read_logic(self.p[*i])).collect();
        let valve_levels: Vec<bool> = valves.iter().map(|(_, i)| self.open[*i]).collect();
        let initial = nodes
            .iter()
            .map(|(id, _)| id.clone())
            .zip(node_levels.iter().copied())
            .chain(valves.iter().map(|(id, _)| id.clone()).zip(valve_levels.iter().map(|&o| valve_level(o))))
            .collect();
        self.recorder = Some(Recorder {
            stride: stride.max(1),
            start_step: self.step,
            series: vec![Vec::new(); nodes.len()],
            valve_series: vec![Vec::new(); valves.len()],
            nodes,
            valves,
            node_levels,
            valve_levels,
            events: Vec::new(),
            initial,
        });
        self.sample();
        Ok(())
    }

    fn sample(&mut self) {
        let Some(rec) = self.recorder.as_mut() else { return };
        for ((_, i), s) in rec.nodes.iter().zip(rec.series.iter_mut()) {
            s.push(self.p[*i]);
        }
        for ((_, i), s) in rec.valves.iter().zip(rec.valve_series.iter_mut()) {
            s.push(self.open[*i]);
        }
    }

    fn observe(&mut self) {
        let step = self.step;
        let time = self.time();
        let Some(rec) = self.recorder.as_mut() else { return };
        for ((id, i), last) in rec.nodes.iter().zip(rec.node_levels.iter_mut()) {
            let now = read_logic(self.p[*i]);
            if now != *last {
                rec.events.push(LogicEvent {
                    step,
                    time,
                    signal: id.clone(),
                    old: *last,
                    new: now,
                });
                *last = now;
            }
        }
        for ((id, i), last) in rec.valves.iter().zip(rec.valve_levels.iter_mut()) {
            let now = self.open[*i];
            if now != *last {
                rec.events.push(LogicEvent {
                    step,
                    time,
                    signal: id.clone(),
                    old: valve_level(*last),
                    new: valve_level(now),
                });
                *last = now;
            }
        }
        if (step - rec.start_step).is_multiple_of(rec.stride) {
            self.sample();
        }
    }

    /// Stops recording and returns what was captured.
    pub fn take_waveform(&mut self) -> Option<Waveform> {
        let rec = self.recorder.take()?;
        Some(Waveform {
            dt: self.dt,
            stride: rec.stride,
            start_step: rec.start_step,
            signals: rec.nodes.into_iter().map(|(id, _)| id).zip(rec.series).collect(),
            valve_series: rec.valves.into_iter().map(|(id, _)| id).zip(rec.valve_series).collect(),
            events: rec.events,
            initial: rec.initial,
        })
    }
}

/// Step at which an event scheduled for time `t` takes effect.
pub fn step_index(t: f64, dt: f64) -> u64 {
    (t / dt - 1e-9).ceil().max(0.0) as u64
}

/// Probes recorded by [`run_timed`]: the netlist's own, or every free node
/// when it declares none.
pub fn default_probes(net: &Netlist) -> Vec<Probe> {
    if net.probes().is_empty() {
        net.free_nodes().map(|n| Probe::Node(n.id.clone())).collect()
    } else {
        net.probes().to_vec()
    }
}

/// Runs a stimulus from t = 0 to `t_end`, sampling every step.
pub fn run_timed(net: &Netlist, stim: &Stimulus, t_end: f64, dt: f64) -> Result<Waveform, EngineError> {
    let mut sim = Simulator::new(net, dt)?;
    stim.check_order()?;
    for (node, clock) in &stim.clocks {
        sim.add_clock(node, *clock)?;
    }
    let events = stim.sorted_events();
    let mut next = 0;
    let end = step_index(t_end, dt);
    let fire = |sim: &mut Simulator, next: &mut usize| -> Result<(), EngineError> {
        while *next < events.len() && step_index(events[*next].time, dt) <= sim.steps() {
            sim.apply(events[*next])?;
            *next += 1;
        }
        Ok(())
    };
    fire(&mut sim, &mut next)?;
    sim.record(&default_probes(net), 1)?;
    while sim.steps() < end {
        fire(&mut sim, &mut next)?;
        sim.step();
    }
    Ok(sim.take_waveform().expect("recording started above"))
}
