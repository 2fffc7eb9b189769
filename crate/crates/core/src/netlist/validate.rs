use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use super::{Netlist, Rail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

fn warn(message: String) -> Diagnostic {
    Diagnostic {
        severity: Severity::Warning,
        message,
    }
}

fn error(message: String) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        message,
    }
}

/// Structural lint. An empty report means the netlist is well formed.
///
/// Reachability is traced from the rails, from valve gates, and from every
/// node with no channel or port attached: such nodes are either driven from
/// outside (inputs, cell ports) or are dynamic storage behind pass valves.
pub fn validate(net: &Netlist) -> Vec<Diagnostic> {
    let mut report = Vec::new();
    let mut incident: HashSet<&str> = HashSet::new();
    let mut wired: HashSet<&str> = HashSet::new();
    let gates: HashSet<&str> = net.valves().map(|v| v.gate.as_str()).collect();
    let mut adjacency: HashMap<&str, Vec<&str>> = HashMap::new();
    fn link<'n>(adjacency: &mut HashMap<&'n str, Vec<&'n str>>, a: &'n str, b: &'n str) {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }

    for c in net.channels() {
        incident.extend([c.a.as_str(), c.b.as_str()]);
        wired.extend([c.a.as_str(), c.b.as_str()]);
        link(&mut adjacency, &c.a, &c.b);
    }
    for p in net.ports() {
        incident.extend([p.a.as_str(), p.b.as_str()]);
        wired.extend([p.a.as_str(), p.b.as_str()]);
        link(&mut adjacency, &p.a, &p.b);
    }
    let atm = net.rail_id(Rail::Atmosphere);
    for v in net.valves() {
        incident.extend([v.gate.as_str(), v.source.as_str(), v.drain.as_str()]);
        // A valve gated by the atmosphere rail can never open.
        if Some(v.gate.as_str()) != atm {
            link(&mut adjacency, &v.source, &v.drain);
        }

        if !(v.theta_close < v.theta_open) {
            report.push(error(format!(
                "valve '{}': hysteresis order violated (topen={}, tclose={})",
                v.id, v.theta_open, v.theta_close
            )));
        }
        if !(v.theta_close > 0.0 && v.theta_open < 1.0) {
            report.push(error(format!(
                "valve '{}': thresholds must lie strictly inside (0, 1)",
                v.id
            )));
        }
    }

    let mut reached: HashSet<&str> = HashSet::new();
    let mut queue: VecDeque<&str> = net
        .nodes()
        .filter(|n| n.is_rail() || gates.contains(n.id.as_str()) || !wired.contains(n.id.as_str()))
        .map(|n| n.id.as_str())
        .collect();
    reached.extend(queue.iter().copied());
    while let Some(id) = queue.pop_front() {
        for &next in adjacency.get(id).into_iter().flatten() {
            if reached.insert(next) {
                queue.push_back(next);
            }
        }
    }

    for n in net.free_nodes() {
        let id = n.id.as_str();
        if !incident.contains(id) {
            report.push(warn(format!("dangling node '{id}'")));
        } else if adjacency.contains_key(id) && !reached.contains(id) {
            report.push(warn(format!("unreachable node '{id}': no path to a rail")));
        }
    }
    report
}
