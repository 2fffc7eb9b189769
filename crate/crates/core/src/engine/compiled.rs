use std::collections::HashMap;

use crate::netlist::Netlist;

#[derive(Debug, Clone)]
pub(crate) struct Link {
    pub a: usize,
    pub b: usize,
    pub g: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct CValve {
    pub gate: usize,
    pub a: usize,
    pub b: usize,
    pub g: f64,
    pub theta_open: f64,
    pub theta_close: f64,
    pub initially_open: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct CPort {
    pub link: Link,
    pub covered: bool,
}

/// Index-based view of a netlist for the solvers.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub ids: Vec<String>,
    pub index: HashMap<String, usize>,
    pub cap: Vec<f64>,
    /// Rail pressure for rail nodes.
    pub fixed: Vec<Option<f64>>,
    pub init: Vec<Option<f64>>,
    pub channels: Vec<Link>,
    pub ports: Vec<CPort>,
    pub port_ids: Vec<String>,
    pub port_index: HashMap<String, usize>,
    pub valves: Vec<CValve>,
    pub valve_ids: Vec<String>,
    pub valve_index: HashMap<String, usize>,
}

impl Compiled {
    pub fn new(net: &Netlist) -> Self {
        let ids: Vec<String> = net.nodes().map(|n| n.id.clone()).collect();
        let index: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let at = |id: &str| index[id];
        let channels = net
            .channels()
            .iter()
            .map(|c| Link {
                a: at(&c.a),
                b: at(&c.b),
                g: c.conductance,
            })
            .collect();
        let ports = net
            .ports()
            .map(|p| CPort {
                link: Link {
                    a: at(&p.a),
                    b: at(&p.b),
                    g: p.conductance,
                },
                covered: p.covered,
            })
            .collect();
        let port_ids: Vec<String> = net.ports().map(|p| p.id.clone()).collect();
        let valves = net
            .valves()
            .map(|v| CValve {
                gate: at(&v.gate),
                a: at(&v.source),
                b: at(&v.drain),
                g: v.g_open,
                theta_open: v.theta_open,
                theta_close: v.theta_close,
                initially_open: v.initially_open,
            })
            .collect();
        let valve_ids: Vec<String> = net.valves().map(|v| v.id.clone()).collect();
        Compiled {
            cap: net.nodes().map(|n| n.capacitance).collect(),
            fixed: net.nodes().map(|n| n.rail.map(|r| r.pressure())).collect(),
            init: net.nodes().map(|n| n.init).collect(),
            port_index: port_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect(),
            valve_index: valve_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect(),
            ids,
            index,
            channels,
            ports,
            port_ids,
            valves,
            valve_ids,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Initial pressure vector: rails at their level, others at `init` or 0.
    pub fn initial_pressures(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.fixed[i].or(self.init[i]).unwrap_or(0.0))
            .collect()
    }

    /// Calls `f(a, b, g)` for every element that conducts in the given state.
    pub fn for_each_conducting(&self, open: &[bool], covered: &[bool], mut f: impl FnMut(usize, usize, f64)) {
        for l in &self.channels {
            f(l.a, l.b, l.g);
        }
        for (p, c) in self.ports.iter().zip(covered) {
            if !c {
                f(p.link.a, p.link.b, p.link.g);
            }
        }
        for (v, o) in self.valves.iter().zip(open) {
            if *o {
                f(v.a, v.b, v.g);
            }
        }
    }
}
