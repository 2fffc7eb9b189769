//! Valve/channel/node level description of a pneumatic circuit.
//!
//! Pressures are normalized: `0.0` is atmosphere (logic 0) and `1.0` is full
//! vacuum (logic 1). Every netlist owns exactly one vacuum rail and one
//! atmosphere rail; all other nodes are free and carry a capacitance.

mod text;
mod validate;

pub use text::{parse_netlist, serialize_netlist};
pub use validate::{validate, Diagnostic, Severity};

use indexmap::IndexMap;
use thiserror::Error;

/// Canonical id of the vacuum rail used by generated fragments.
pub const VAC: &str = "VAC";
/// Canonical id of the atmosphere rail used by generated fragments.
pub const ATM: &str = "ATM";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}undefined node '{id}'", at_line(*.line))]
    UndefinedNode { id: String, line: Option<usize> },
    #[error("{}undefined valve '{id}'", at_line(*.line))]
    UndefinedValve { id: String, line: Option<usize> },
    #[error("{}duplicate id '{id}'", at_line(*.line))]
    DuplicateId { id: String, line: Option<usize> },
    #[error("missing {0} rail")]
    MissingRail(Rail),
    #[error("second {0} rail '{1}'")]
    DuplicateRail(Rail, String),
    #[error("id collision after prefixing: '{0}'")]
    Collision(String),
    #[error("node '{id}' is declared as both a rail and a free node")]
    RailMismatch { id: String },
    #[error("invalid element: {0}")]
    Invalid(String),
    #[error("cell expansion failed: {0}")]
    Cell(String),
}

fn at_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}: "),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rail {
    Vacuum,
    Atmosphere,
}

impl Rail {
    pub fn pressure(self) -> f64 {
        match self {
            Rail::Vacuum => 1.0,
            Rail::Atmosphere => 0.0,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Rail::Vacuum => "vacuum",
            Rail::Atmosphere => "atmosphere",
        }
    }
}

impl std::fmt::Display for Rail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    /// Normalized volume. Ignored for rails.
    pub capacitance: f64,
    pub rail: Option<Rail>,
    /// Pressure at t = 0 for timed runs; `None` starts at atmosphere.
    pub init: Option<f64>,
}

impl Node {
    pub fn free(id: impl Into<String>, capacitance: f64) -> Self {
        Node {
            id: id.into(),
            capacitance,
            rail: None,
            init: None,
        }
    }

    pub fn rail(id: impl Into<String>, rail: Rail) -> Self {
        Node {
            id: id.into(),
            capacitance: 1.0,
            rail: Some(rail),
            init: None,
        }
    }

    pub fn is_rail(&self) -> bool {
        self.rail.is_some()
    }
}

/// Always-conducting channel. Pull-ups are channels to the vacuum rail.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub a: String,
    pub b: String,
    pub conductance: f64,
}

/// Normally-closed membrane valve. Source and drain are interchangeable.
#[derive(Debug, Clone, PartialEq)]
pub struct Valve {
    pub id: String,
    pub gate: String,
    pub source: String,
    pub drain: String,
    pub g_open: f64,
    pub theta_open: f64,
    pub theta_close: f64,
    pub initially_open: bool,
}

/// A hole to the outside that a finger can cover. Conducts while uncovered.
#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub id: String,
    pub a: String,
    pub b: String,
    pub conductance: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Probe {
    Node(String),
    Valve(String),
}

impl Probe {
    pub fn name(&self) -> &str {
        match self {
            Probe::Node(id) | Probe::Valve(id) => id,
        }
    }
}

/// Element parameter defaults shared by the text format and cell library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementDefaults {
    pub capacitance: f64,
    pub g_open: f64,
    pub theta_open: f64,
    pub theta_close: f64,
}

impl Default for ElementDefaults {
    fn default() -> Self {
        ElementDefaults {
            capacitance: 1.0,
            g_open: 100.0,
            theta_open: 0.75,
            theta_close: 0.65,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Netlist {
    nodes: IndexMap<String, Node>,
    channels: Vec<Channel>,
    valves: IndexMap<String, Valve>,
    ports: IndexMap<String, Port>,
    probes: Vec<Probe>,
    metadata: IndexMap<String, String>,
}

impl Netlist {
    /// Netlist holding only the canonical `VAC` and `ATM` rails.
    pub fn new() -> Self {
        let mut net = Netlist::default();
        net.nodes.insert(VAC.into(), Node::rail(VAC, Rail::Vacuum));
        net.nodes.insert(ATM.into(), Node::rail(ATM, Rail::Atmosphere));
        net
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut Node> {
        self.nodes.get_mut(id)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn valves(&self) -> impl Iterator<Item = &Valve> {
        self.valves.values()
    }

    pub fn valve(&self, id: &str) -> Option<&Valve> {
        self.valves.get(id)
    }

    pub fn valve_mut(&mut self, id: &str) -> Option<&mut Valve> {
        self.valves.get_mut(id)
    }

    pub fn ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.values()
    }

    pub fn port(&self, id: &str) -> Option<&Port> {
        self.ports.get(id)
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn metadata(&self) -> &IndexMap<String, String> {
        &self.metadata
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn valve_count(&self) -> usize {
        self.valves.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn rail_id(&self, rail: Rail) -> Option<&str> {
        self.nodes
            .values()
            .find(|n| n.rail == Some(rail))
            .map(|n| n.id.as_str())
    }

    /// Id of the vacuum rail. Panics on a netlist without one, which the
    /// parser and constructors never produce.
    pub fn vacuum(&self) -> &str {
        self.rail_id(Rail::Vacuum).expect("netlist has a vacuum rail")
    }

    pub fn atmosphere(&self) -> &str {
        self.rail_id(Rail::Atmosphere)
            .expect("netlist has an atmosphere rail")
    }

    fn id_taken(&self, id: &str) -> bool {
        self.nodes.contains_key(id) || self.valves.contains_key(id) || self.ports.contains_key(id)
    }

    fn require_node(&self, id: &str) -> Result<(), NetlistError> {
        if self.nodes.contains_key(id) {
            Ok(())
        } else {
            Err(NetlistError::UndefinedNode {
                id: id.to_string(),
                line: None,
            })
        }
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), NetlistError> {
        if node.id.is_empty() {
            return Err(NetlistError::Invalid("empty node id".into()));
        }
        if self.id_taken(&node.id) {
            return Err(NetlistError::DuplicateId {
                id: node.id,
                line: None,
            });
        }
        if let Some(rail) = node.rail {
            if let Some(existing) = self.rail_id(rail) {
                return Err(NetlistError::DuplicateRail(rail, existing.to_string()));
            }
        } else if !(node.capacitance > 0.0) {
            return Err(NetlistError::Invalid(format!(
                "node '{}' needs capacitance > 0",
                node.id
            )));
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    /// Declares a free node unless one with this id already exists.
    pub fn ensure_node(&mut self, id: &str, capacitance: f64) -> Result<(), NetlistError> {
        match self.nodes.get(id) {
            Some(_) => Ok(()),
            None => self.add_node(Node::free(id, capacitance)),
        }
    }

    pub fn add_channel(&mut self, channel: Channel) -> Result<(), NetlistError> {
        self.require_node(&channel.a)?;
        self.require_node(&channel.b)?;
        if channel.a == channel.b {
            return Err(NetlistError::Invalid(format!(
                "channel loops on '{}'",
                channel.a
            )));
        }
        if !(channel.conductance > 0.0) {
            return Err(NetlistError::Invalid(format!(
                "channel {}-{} needs conductance > 0",
                channel.a, channel.b
            )));
        }
        self.channels.push(channel);
        Ok(())
    }

    pub fn add_valve(&mut self, valve: Valve) -> Result<(), NetlistError> {
        if valve.id.is_empty() {
            return Err(NetlistError::Invalid("empty valve id".into()));
        }
        if self.id_taken(&valve.id) {
            return Err(NetlistError::DuplicateId {
                id: valve.id,
                line: None,
            });
        }
        for n in [&valve.gate, &valve.source, &valve.drain] {
            self.require_node(n)?;
        }
        if !(valve.g_open > 0.0) {
            return Err(NetlistError::Invalid(format!(
                "valve '{}' needs g > 0",
                valve.id
            )));
        }
        self.valves.insert(valve.id.clone(), valve);
        Ok(())
    }

    /// Replaces a valve by a permanent channel of its open conductance
    /// (a valve stuck open). Probes on the valve are dropped.
    pub fn short_valve(&mut self, id: &str) -> Result<(), NetlistError> {
        let v = self
            .valves
            .shift_remove(id)
            .ok_or_else(|| NetlistError::Invalid(format!("no valve '{id}'")))?;
        self.probes.retain(|p| !matches!(p, Probe::Valve(x) if x == id));
        self.channels.push(Channel {
            a: v.source,
            b: v.drain,
            conductance: v.g_open,
        });
        Ok(())
    }

    pub fn add_port(&mut self, port: Port) -> Result<(), NetlistError> {
        if self.id_taken(&port.id) {
            return Err(NetlistError::DuplicateId {
                id: port.id,
                line: None,
            });
        }
        self.require_node(&port.a)?;
        self.require_node(&port.b)?;
        if port.a == port.b || !(port.conductance > 0.0) {
            return Err(NetlistError::Invalid(format!("bad port '{}'", port.id)));
        }
        self.ports.insert(port.id.clone(), port);
        Ok(())
    }

    pub fn add_probe(&mut self, probe: Probe) -> Result<(), NetlistError> {
        match &probe {
            Probe::Node(id) => self.require_node(id)?,
            Probe::Valve(id) => {
                if !self.valves.contains_key(id) {
                    return Err(NetlistError::UndefinedValve {
                        id: id.clone(),
                        line: None,
                    });
                }
            }
        }
        if !self.probes.contains(&probe) {
            self.probes.push(probe);
        }
        Ok(())
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    /// Copy of this netlist with every non-rail id passed through `f`.
    fn renamed(&self, f: impl Fn(&str) -> String) -> Netlist {
        let map = |id: &str| -> String {
            match self.nodes.get(id) {
                Some(n) if n.is_rail() => id.to_string(),
                _ => f(id),
            }
        };
        let mut out = Netlist {
            metadata: self.metadata.clone(),
            ..Netlist::default()
        };
        for n in self.nodes.values() {
            let id = map(&n.id);
            out.nodes.insert(id.clone(), Node { id, ..n.clone() });
        }
        out.channels = self
            .channels
            .iter()
            .map(|c| Channel {
                a: map(&c.a),
                b: map(&c.b),
                conductance: c.conductance,
            })
            .collect();
        for v in self.valves.values() {
            let id = f(&v.id);
            out.valves.insert(
                id.clone(),
                Valve {
                    id,
                    gate: map(&v.gate),
                    source: map(&v.source),
                    drain: map(&v.drain),
                    ..v.clone()
                },
            );
        }
        for p in self.ports.values() {
            let id = f(&p.id);
            out.ports.insert(
                id.clone(),
                Port {
                    id,
                    a: map(&p.a),
                    b: map(&p.b),
                    ..p.clone()
                },
            );
        }
        out.probes = self
            .probes
            .iter()
            .map(|p| match p {
                Probe::Node(id) => Probe::Node(map(id)),
                Probe::Valve(id) => Probe::Valve(f(id)),
            })
            .collect();
        out
    }

    /// Absorbs `other`, mapping its rails onto ours. With `share_nodes`,
    /// free nodes with equal ids are unified (port binding); otherwise any
    /// equal id is a collision.
    fn absorb(&mut self, other: &Netlist, share_nodes: bool) -> Result<(), NetlistError> {
        let target = |r: Rail| -> String {
            self.rail_id(r).map(str::to_string).unwrap_or_else(|| {
                match r {
                    Rail::Vacuum => VAC,
                    Rail::Atmosphere => ATM,
                }
                .to_string()
            })
        };
        let (vac, atm) = (target(Rail::Vacuum), target(Rail::Atmosphere));
        let resolve = |id: &str| -> String {
            match other.nodes.get(id).and_then(|n| n.rail) {
                Some(Rail::Vacuum) => vac.clone(),
                Some(Rail::Atmosphere) => atm.clone(),
                None => id.to_string(),
            }
        };

        // Check everything before mutating so a failed merge leaves `self` intact.
        for n in other.nodes.values() {
            if n.is_rail() {
                continue;
            }
            if let Some(existing) = self.nodes.get(&n.id) {
                if !share_nodes {
                    return Err(NetlistError::Collision(n.id.clone()));
                }
                if existing.is_rail() {
                    return Err(NetlistError::RailMismatch { id: n.id.clone() });
                }
            } else if self.valves.contains_key(&n.id) || self.ports.contains_key(&n.id) {
                return Err(NetlistError::Collision(n.id.clone()));
            }
        }
        for id in other.valves.keys().chain(other.ports.keys()) {
            if self.id_taken(id) || (other.nodes.contains_key(id)) {
                return Err(NetlistError::Collision(id.clone()));
            }
        }

        for n in other.nodes.values() {
            match n.rail {
                Some(r) => {
                    if self.rail_id(r).is_none() {
                        let id = resolve(&n.id);
                        self.nodes.insert(id.clone(), Node::rail(id, r));
                    }
                }
                None => {
                    if !self.nodes.contains_key(&n.id) {
                        self.nodes.insert(n.id.clone(), n.clone());
                    } else if let Some(init) = n.init {
                        // A fragment may seed the initial pressure of a shared node.
                        let existing = self.nodes.get_mut(&n.id).expect("checked");
                        existing.init.get_or_insert(init);
                    }
                }
            }
        }
        for c in &other.channels {
            self.channels.push(Channel {
                a: resolve(&c.a),
                b: resolve(&c.b),
                conductance: c.conductance,
            });
        }
        for v in other.valves.values() {
            self.valves.insert(
                v.id.clone(),
                Valve {
                    gate: resolve(&v.gate),
                    source: resolve(&v.source),
                    drain: resolve(&v.drain),
                    ..v.clone()
                },
            );
        }
        for p in other.ports.values() {
            self.ports.insert(
                p.id.clone(),
                Port {
                    a: resolve(&p.a),
                    b: resolve(&p.b),
                    ..p.clone()
                },
            );
        }
        for p in &other.probes {
            let p = match p {
                Probe::Node(id) => Probe::Node(resolve(id)),
                Probe::Valve(id) => Probe::Valve(id.clone()),
            };
            if !self.probes.contains(&p) {
                self.probes.push(p);
            }
        }
        for (k, v) in &other.metadata {
            if !self.metadata.contains_key(k) {
                self.metadata.insert(k.clone(), v.clone());
            }
        }
        Ok(())
    }

    /// Adds a cell fragment whose port nodes share ids with nodes of `self`.
    pub fn union(&mut self, fragment: &Netlist) -> Result<(), NetlistError> {
        self.absorb(fragment, true)
    }

    /// Ids of free nodes, in declaration order.
    pub fn free_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| !n.is_rail())
    }
}

/// Disjoint union of `a` and `b`, with every non-rail id of `b` prefixed.
/// Rails are shared and probes are concatenated.
pub fn merge(a: &Netlist, b: &Netlist, prefix: &str) -> Result<Netlist, NetlistError> {
    let renamed = b.renamed(|id| format!("{prefix}{id}"));
    let mut out = a.clone();
    out.absorb(&renamed, false)?;
    Ok(out)
}
