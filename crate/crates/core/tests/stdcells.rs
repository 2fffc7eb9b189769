use pneuma_core::engine::{read_logic, Clock, LogicLevel, Simulator};
use pneuma_core::netlist::{Netlist, Probe};
use pneuma_core::stdcells::{expand_button, expand_dff, expand_indicator, expand_not, CellParams, DffPorts};

fn dff() -> Netlist {
    let ports = DffPorts {
        d: "d",
        clk: "clk",
        q: "q",
        qbar: "qb",
        shared_clk_inv: None,
    };
    let mut net = expand_dff("ff", &ports, Some(false), &CellParams::default()).unwrap();
    for id in ["d", "clk", "q", "qb"] {
        net.add_probe(Probe::Node(id.into())).unwrap();
    }
    net
}

/// Falling edges at 40, 80, ...; D toggles at times that include the middle
/// of high phases and points shortly before edges.
#[test]
fn dff_is_negative_edge_triggered() {
    let period = 40.0;
    let settle = 10.0;
    let net = dff();
    let mut sim = Simulator::new(&net, 1e-3).unwrap();
    sim.add_clock("clk", Clock::new(period, 0.5, period / 2.0).unwrap()).unwrap();
    sim.record(net.probes(), 100).unwrap();
    let d_schedule = [(0.0, 1.0), (30.0, 0.0), (52.0, 1.0), (70.0, 0.0), (75.0, 1.0), (110.0, 0.0), (150.0, 1.0)];
    for (t, v) in d_schedule {
        sim.run_until(t);
        sim.set_drive("d", Some(v)).unwrap();
    }
    sim.run_until(8.0 * period);
    let w = sim.take_waveform().unwrap();

    let d_at = |t: f64| d_schedule.iter().rev().find(|(s, _)| *s <= t).unwrap().1 > 0.5;
    for k in 1..8 {
        let edge = k as f64 * period;
        let want = d_at(edge - 5.0);
        assert_eq!(w.level_at("q", edge + settle), Some(LogicLevel::from_bit(want)), "edge {edge}");
        assert_eq!(w.level_at("qb", edge + settle), Some(LogicLevel::from_bit(!want)), "edge {edge}");
    }
    // Q only moves in the settling window after a falling edge.
    for e in w.events_for("q") {
        let since_edge = e.time.rem_euclid(period);
        assert!(since_edge <= settle, "q changed at {}", e.time);
    }
}

#[test]
fn dff_flags_unknown_d_at_the_edge() {
    let net = dff();
    let mut sim = Simulator::new(&net, 1e-3).unwrap();
    sim.add_clock("clk", Clock::new(40.0, 0.5, 20.0).unwrap()).unwrap();
    sim.set_drive("d", Some(0.5)).unwrap();
    sim.run_until(39.0);
    // The harness refuses to read a register whose D sits in the UNKNOWN band.
    assert_eq!(read_logic(sim.pressure("d").unwrap()), LogicLevel::Unknown);
}

#[test]
fn button_levels_and_events() {
    let p = CellParams::default();
    let (net, handle) = expand_button("btn", "out", &p).unwrap();
    let mut sim = Simulator::new(&net, 1e-3).unwrap();
    sim.record(&[Probe::Node("out".into())], 1000).unwrap();
    sim.run_until(10.0);
    assert!((sim.pressure("out").unwrap() - 1.0 / 101.0).abs() < 1e-6);
    sim.set_covered(&handle.port, true).unwrap();
    sim.run_until(40.0);
    assert!(sim.pressure("out").unwrap() > 0.999);
    sim.set_covered(&handle.port, false).unwrap();
    sim.run_until(50.0);
    let w = sim.take_waveform().unwrap();
    let rising = w.events_for("out").filter(|e| e.new == LogicLevel::One).count();
    let falling = w.events_for("out").filter(|e| e.new == LogicLevel::Zero).count();
    assert_eq!((rising, falling), (1, 1));
}

#[test]
fn indicator_does_not_load_its_signal() {
    let p = CellParams::default();
    let bare = expand_not("u", "a", "y", &p).unwrap();
    let mut loaded = bare.clone();
    loaded.union(&expand_indicator("lamp", "y", &p).unwrap()).unwrap();
    let trace = |net: &Netlist| {
        let mut sim = Simulator::new(net, 1e-3).unwrap();
        sim.set_drive("a", Some(1.0)).unwrap();
        let mut out = Vec::new();
        for t in 1..=20 {
            if t == 10 {
                sim.set_drive("a", Some(0.0)).unwrap();
            }
            sim.run_until(t as f64);
            out.push(sim.pressure("y").unwrap());
        }
        out
    };
    assert_eq!(trace(&bare), trace(&loaded));
    let mut sim = Simulator::new(&loaded, 1e-3).unwrap();
    sim.run_until(10.0);
    assert_eq!(sim.level("lamp.lamp"), Some(LogicLevel::Zero));
}
