//! Gate-level macros expanded into valve-level netlist fragments.
//!
//! Every fragment carries the canonical `VAC`/`ATM` rails and declares its
//! port nodes, so it validates on its own and can be `union`ed into a host
//! netlist that already declares the same port ids.

use std::str::FromStr;

use indexmap::IndexMap;
use thiserror::Error;

use crate::netlist::{Channel, Netlist, NetlistError, Node, Port, Probe, Valve, ATM, VAC};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellError {
    #[error("NAND fan-in {0} outside 2..=3")]
    InvalidFanIn(usize),
    #[error("ring oscillator needs an odd stage count >= 3, got {0}")]
    InvalidRing(usize),
    #[error("{taps} taps for a {stages}-stage ring")]
    TooManyTaps { taps: usize, stages: usize },
    #[error("port collision on node '{0}'")]
    PortCollision(String),
    #[error("missing port '{0}'")]
    MissingPort(String),
    #[error("output port '{0}' is a rail")]
    RailOutput(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Electrical parameters used when expanding cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub g_pullup: f64,
    pub g_open: f64,
    pub theta_open: f64,
    pub theta_close: f64,
    pub capacitance: f64,
    /// Conductance of a membrane bore hole (PLA interconnect).
    pub g_via: f64,
    /// Conductance of an uncovered button port to atmosphere.
    pub g_short: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        CellParams {
            g_pullup: 1.0,
            g_open: 100.0,
            theta_open: 0.75,
            theta_close: 0.65,
            capacitance: 1.0,
            g_via: 100.0,
            g_short: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Not,
    Nand(usize),
    Buf,
    Indicator,
    Dff,
    RingOsc(usize),
    Button,
}

impl CellKind {
    pub fn port_names(self) -> &'static [&'static str] {
        match self {
            CellKind::Not | CellKind::Buf => &["in", "out"],
            CellKind::Nand(3) => &["a", "b", "c", "out"],
            CellKind::Nand(_) => &["a", "b", "out"],
            CellKind::Indicator => &["in"],
            CellKind::Dff => &["d", "clk", "q", "qbar", "clkn"],
            CellKind::RingOsc(_) => &["taps"],
            CellKind::Button => &["out"],
        }
    }

    pub fn optional_ports(self) -> &'static [&'static str] {
        match self {
            CellKind::Dff => &["clkn"],
            _ => &[],
        }
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "NOT" => CellKind::Not,
            "BUF" => CellKind::Buf,
            "INDICATOR" => CellKind::Indicator,
            "DFF" => CellKind::Dff,
            "BUTTON" => CellKind::Button,
            _ => {
                if let Some(k) = s.strip_prefix("NAND") {
                    CellKind::Nand(k.parse().map_err(|_| format!("unknown cell kind '{s}'"))?)
                } else if let Some(n) = s.strip_prefix("RING") {
                    CellKind::RingOsc(n.parse().map_err(|_| format!("unknown cell kind '{s}'"))?)
                } else {
                    return Err(format!("unknown cell kind '{s}'"));
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub kind: CellKind,
    /// Instance name; prefixes every internal id.
    pub name: String,
    /// Port name to node id. Ring taps are a comma-separated list.
    pub ports: IndexMap<String, String>,
    pub params: CellParams,
    /// Power-up value of a flip-flop.
    pub init: Option<bool>,
}

impl CellSpec {
    pub fn new(kind: CellKind, name: impl Into<String>) -> Self {
        CellSpec {
            kind,
            name: name.into(),
            ports: IndexMap::new(),
            params: CellParams::default(),
            init: None,
        }
    }

    pub fn port(mut self, name: &str, node: &str) -> Self {
        self.ports.insert(name.to_string(), node.to_string());
        self
    }

    fn get(&self, name: &str) -> Result<&str, CellError> {
        self.ports
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| CellError::MissingPort(name.to_string()))
    }
}

/// Expands any cell from its spec.
pub fn expand_cell(spec: &CellSpec) -> Result<Netlist, CellError> {
    let p = &spec.params;
    let name = spec.name.as_str();
    match spec.kind {
        CellKind::Not => expand_not(name, spec.get("in")?, spec.get("out")?, p),
        CellKind::Buf => expand_buf(name, spec.get("in")?, spec.get("out")?, p),
        CellKind::Nand(k) => {
            let pins = ["a", "b", "c"];
            if !(2..=3).contains(&k) {
                return Err(CellError::InvalidFanIn(k));
            }
            let inputs = pins[..k]
                .iter()
                .map(|pin| spec.get(pin))
                .collect::<Result<Vec<_>, _>>()?;
            expand_nand(name, &inputs, spec.get("out")?, p)
        }
        CellKind::Indicator => expand_indicator(name, spec.get("in")?, p),
        CellKind::Dff => {
            let ports = DffPorts {
                d: spec.get("d")?,
                clk: spec.get("clk")?,
                q: spec.get("q")?,
                qbar: spec.get("qbar")?,
                shared_clk_inv: spec.ports.get("clkn").map(String::as_str),
            };
            expand_dff(name, &ports, spec.init, p)
        }
        CellKind::RingOsc(n) => {
            let taps: Vec<&str> = spec.get("taps")?.split(',').collect();
            expand_ring_osc(name, n, &taps, p)
        }
        CellKind::Button => expand_button(name, spec.get("out")?, p).map(|(net, _)| net),
    }
}

fn is_rail(id: &str) -> bool {
    id == VAC || id == ATM
}

fn check_ports(inputs: &[&str], outputs: &[&str]) -> Result<(), CellError> {
    let mut seen: Vec<&str> = Vec::new();
    for &o in outputs {
        if is_rail(o) {
            return Err(CellError::RailOutput(o.to_string()));
        }
    }
    for &id in inputs.iter().chain(outputs) {
        if is_rail(id) {
            continue;
        }
        if seen.contains(&id) {
            return Err(CellError::PortCollision(id.to_string()));
        }
        seen.push(id);
    }
    Ok(())
}

fn declare(net: &mut Netlist, ids: &[&str], p: &CellParams) -> Result<(), CellError> {
    for &id in ids {
        if !is_rail(id) {
            net.ensure_node(id, p.capacitance)?;
        }
    }
    Ok(())
}

fn valve(id: String, gate: &str, source: &str, drain: &str, p: &CellParams) -> Valve {
    Valve {
        id,
        gate: gate.to_string(),
        source: source.to_string(),
        drain: drain.to_string(),
        g_open: p.g_open,
        theta_open: p.theta_open,
        theta_close: p.theta_close,
        initially_open: false,
    }
}

fn pull_up(net: &mut Netlist, node: &str, p: &CellParams) -> Result<(), CellError> {
    net.add_channel(Channel {
        a: VAC.to_string(),
        b: node.to_string(),
        conductance: p.g_pullup,
    })?;
    Ok(())
}

/// One pull-down valve plus a pull-up channel.
pub fn expand_not(name: &str, input: &str, output: &str, p: &CellParams) -> Result<Netlist, CellError> {
    check_ports(&[input], &[output])?;
    let mut net = Netlist::new();
    declare(&mut net, &[input, output], p)?;
    pull_up(&mut net, output, p)?;
    net.add_valve(valve(format!("{name}.v"), input, output, ATM, p))?;
    Ok(net)
}

/// `k` valves in series from the output to atmosphere, `k - 1` internal nodes.
pub fn expand_nand(name: &str, inputs: &[&str], output: &str, p: &CellParams) -> Result<Netlist, CellError> {
    let k = inputs.len();
    if !(2..=3).contains(&k) {
        return Err(CellError::InvalidFanIn(k));
    }
    check_ports(inputs, &[output])?;
    let mut net = Netlist::new();
    declare(&mut net, inputs, p)?;
    declare(&mut net, &[output], p)?;
    pull_up(&mut net, output, p)?;
    let mut upper = output.to_string();
    for (i, gate) in inputs.iter().enumerate() {
        let lower = if i + 1 == k {
            ATM.to_string()
        } else {
            let id = format!("{name}.n{}", i + 1);
            net.add_node(Node::free(&id, p.capacitance))?;
            id
        };
        net.add_valve(valve(format!("{name}.v{i}"), gate, &upper, &lower, p))?;
        upper = lower;
    }
    Ok(net)
}

/// Two chained inverters; the intermediate node is `<name>.mid`.
pub fn expand_buf(name: &str, input: &str, output: &str, p: &CellParams) -> Result<Netlist, CellError> {
    check_ports(&[input], &[output])?;
    let mid = format!("{name}.mid");
    let mut net = expand_not(&format!("{name}.a"), input, &mid, p)?;
    net.union(&expand_not(&format!("{name}.b"), &mid, output, p)?)?;
    Ok(net)
}

/// Readout valve on its own pull-up divider. The monitored signal only
/// touches a valve gate, so it sees no load.
pub fn expand_indicator(name: &str, signal: &str, p: &CellParams) -> Result<Netlist, CellError> {
    let lamp = format!("{name}.lamp");
    let mut net = expand_not(name, signal, &lamp, p)?;
    net.add_probe(Probe::Node(lamp))?;
    net.add_probe(Probe::Valve(format!("{name}.v")))?;
    Ok(net)
}

#[derive(Debug, Clone, Copy)]
pub struct DffPorts<'a> {
    pub d: &'a str,
    pub clk: &'a str,
    pub q: &'a str,
    pub qbar: &'a str,
    /// Inverted clock shared with other flip-flops; when absent the cell
    /// builds its own clock inverter.
    pub shared_clk_inv: Option<&'a str>,
}

/// Negative-edge-triggered leader/follower flip-flop with dynamic storage.
///
/// The leader pass valve (gate = clk) writes D onto storage node `L`, two
/// inverters restore it, and the follower pass valve (gate = inverted clk)
/// writes the restored value onto storage node `F`, which drives Q̄ then Q.
/// Six valves, plus one for the clock inverter when it is not shared.
pub fn expand_dff(
    name: &str,
    ports: &DffPorts<'_>,
    init: Option<bool>,
    p: &CellParams,
) -> Result<Netlist, CellError> {
    let mut inputs = vec![ports.d, ports.clk];
    inputs.extend(ports.shared_clk_inv);
    check_ports(&inputs, &[ports.q, ports.qbar])?;

    let mut net = Netlist::new();
    declare(&mut net, &inputs, p)?;
    declare(&mut net, &[ports.q, ports.qbar], p)?;

    let clkn = match ports.shared_clk_inv {
        Some(id) => id.to_string(),
        None => {
            let id = format!("{name}.clkn");
            net.union(&expand_not(&format!("{name}.ck"), ports.clk, &id, p)?)?;
            id
        }
    };
    let l = format!("{name}.L");
    let lb = format!("{name}.Lb");
    let lr = format!("{name}.Lr");
    let f = format!("{name}.F");
    for id in [&l, &f] {
        net.add_node(Node::free(id, p.capacitance))?;
    }
    net.add_valve(valve(format!("{name}.lead"), ports.clk, ports.d, &l, p))?;
    net.union(&expand_not(&format!("{name}.r1"), &l, &lb, p)?)?;
    net.union(&expand_not(&format!("{name}.r2"), &lb, &lr, p)?)?;
    net.add_valve(valve(format!("{name}.follow"), &clkn, &lr, &f, p))?;
    net.union(&expand_not(&format!("{name}.o1"), &f, ports.qbar, p)?)?;
    net.union(&expand_not(&format!("{name}.o2"), ports.qbar, ports.q, p)?)?;

    if let Some(bit) = init {
        let level = |b: bool| if b { 1.0 } else { 0.0 };
        for (id, b) in [
            (l.as_str(), bit),
            (lb.as_str(), !bit),
            (lr.as_str(), bit),
            (f.as_str(), bit),
            (ports.qbar, !bit),
            (ports.q, bit),
        ] {
            if let Some(node) = net.node_mut(id) {
                node.init = Some(level(b));
            }
        }
    }
    Ok(net)
}

/// Stage that drives tap `i` of an `n`-stage ring. Taps taken at stages
/// 0, 2, 4, ... rise in list order, which is what a peristaltic pump needs.
pub fn ring_tap_stage(i: usize, n: usize) -> usize {
    (2 * i) % n
}

/// `n` inverters in a closed loop. Stage outputs start alternating 1/0 so
/// that exactly one stage is inconsistent and a single wave circulates.
pub fn expand_ring_osc(name: &str, n: usize, taps: &[&str], p: &CellParams) -> Result<Netlist, CellError> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(CellError::InvalidRing(n));
    }
    if taps.len() > n {
        return Err(CellError::TooManyTaps {
            taps: taps.len(),
            stages: n,
        });
    }
    check_ports(&[], taps)?;
    let mut outputs: Vec<String> = (0..n).map(|k| format!("{name}.s{k}")).collect();
    for (i, tap) in taps.iter().enumerate() {
        outputs[ring_tap_stage(i, n)] = tap.to_string();
    }
    let mut net = Netlist::new();
    for (k, out) in outputs.iter().enumerate() {
        net.add_node(Node {
            init: Some(if k % 2 == 0 { 1.0 } else { 0.0 }),
            ..Node::free(out, p.capacitance)
        })?;
    }
    for k in 0..n {
        let input = &outputs[(k + n - 1) % n];
        net.union(&expand_not(&format!("{name}.i{k}"), input, &outputs[k], p)?)?;
    }
    Ok(net)
}

/// Handle for toggling a button at run time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ButtonHandle {
    pub port: String,
}

/// Pull-up to vacuum shorted to atmosphere through an open port. Covering
/// the port removes the short and `out` charges toward 1.
pub fn expand_button(name: &str, out: &str, p: &CellParams) -> Result<(Netlist, ButtonHandle), CellError> {
    check_ports(&[], &[out])?;
    let mut net = Netlist::new();
    declare(&mut net, &[out], p)?;
    pull_up(&mut net, out, p)?;
    net.add_port(Port {
        id: name.to_string(),
        a: out.to_string(),
        b: ATM.to_string(),
        conductance: p.g_short,
        covered: false,
    })?;
    Ok((
        net,
        ButtonHandle {
            port: name.to_string(),
        },
    ))
}
