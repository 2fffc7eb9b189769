//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pneuma_core::chip::register;
use pneuma_core::engine::{read_logic, LogicLevel, QuasiStaticSolver, Simulator};
use pneuma_core::fluidics::{dilution_chip, mixer_chip, run_embedded, LadderTopology, MixerTopology, Script, R1, R2};
use pneuma_core::fluidics::cosim::DILUTION_CLOCK;
use pneuma_core::fsmc::{
    builtin_program, check_transition, compile, min_period, state_label, verify, Compiled, State, VerifyOptions,
};
use pneuma_core::pla::{eval_pattern, expand_pla, quasi_static_table, HolePattern, PlaPorts, PlaShape};
use pneuma_core::stdcells::{expand_not, expand_ring_osc, CellParams};

const DT: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: false,
        detail: detail.into(),
    }
}

fn program(name: &str) -> Compiled {
    compile(builtin_program(name).expect("builtin")).expect("compiles")
}

/// Random pattern within the device fan-in limits.
fn random_pattern(rng: &mut ChaCha8Rng, shape: &PlaShape) -> HolePattern {
    let mut p = HolePattern::empty(shape);
    for row in p.and_plane.iter_mut() {
        let k = rng.gen_range(0..=shape.max_and_fanin);
        for c in rand::seq::index::sample(rng, shape.num_literal_columns, k) {
            row[c] = true;
        }
    }
    for row in p.or_plane.iter_mut() {
        let k = rng.gen_range(0..=shape.max_or_fanin);
        for r in rand::seq::index::sample(rng, shape.num_products, k) {
            row[r] = true;
        }
    }
    p
}

fn c1_pla_faithfulness() -> Outcome {
    let start = Instant::now();
    let shape = PlaShape::DEVICE;
    let ports = PlaPorts::default();
    let params = CellParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x504c41);
    let n = 200;
    let mut agree = 0;
    for i in 0..n {
        let p = random_pattern(&mut rng, &shape);
        if p.check(&shape).is_err() {
            return fail(format!("generator produced an illegal pattern at #{i}"));
        }
        let net = match expand_pla(&p, &ports, &params) {
            Ok(n) => n,
            Err(e) => return fail(format!("pattern #{i}: {e}")),
        };
        let table = match quasi_static_table(&net, &ports) {
            Ok(t) => t,
            Err(e) => return fail(format!("pattern #{i}: {e}")),
        };
        for (row, (n1, n0)) in table.iter().enumerate() {
            let (o1, o0) = eval_pattern(&p, row & 4 != 0, row & 2 != 0, row & 1 != 0);
            if n1.as_bit() == Some(o1) && n0.as_bit() == Some(o0) {
                agree += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let total = n * 8;
    let detail = format!("{agree}/{total} rows agree over {n} patterns in {:.1}s", elapsed.as_secs_f64());
    if agree == total && elapsed < Duration::from_secs(60) {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn c2_example_programs() -> Outcome {
    let opts = VerifyOptions {
        search_period: false,
        ..Default::default()
    };
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["counter", "hold", "phase"] {
        let c = program(name);
        // Intended behaviour, checked on the compiled table.
        let t = &c.table;
        let intent = match name {
            "counter" => (0..4).all(|s| t.next(s, false) == 0b00),
            "hold" => t.next(0b11, false) == 0b11,
            // In phase (00 <-> 11) with A=0, out of phase (01 <-> 10) with A=1.
            _ => [0b00, 0b11].iter().all(|&s| t.next(s, false) == s ^ 0b11)
                && [0b01, 0b10].iter().all(|&s| t.next(s, true) == s ^ 0b11),
        };
        let report = verify(&c.pattern, &c.table, &opts);
        let passed = report.checks.iter().filter(|k| k.passed()).count();
        let rows = c.pattern.and_plane.iter().filter(|r| r.iter().any(|h| *h)).count();
        let rows_ok = name != "hold" || rows == 4;
        ok &= intent && passed == 8 && rows_ok;
        notes.push(format!("{name}: intent {} {passed}/8 rows {rows}", if intent { "ok" } else { "MISMATCH" }));
    }
    let detail = notes.join("; ");
    if ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn c3_structural_counts() -> Outcome {
    let p = CellParams::default();
    let pla = expand_pla(&HolePattern::default(), &PlaPorts::default(), &p).map(|n| n.valve_count());
    let reg = register(&p, "CLK", None).map(|n| n.valve_count());
    let osc = expand_ring_osc("osc", 5, &["a", "b", "c"], &p).map(|n| n.valve_count());
    match (pla, reg, osc) {
        (Ok(a), Ok(b), Ok(c)) => {
            let detail = format!("PLA {a}, register {b}, ring oscillator {c}");
            if (a, b, c) == (18, 13, 5) {
                pass(detail)
            } else {
                fail(detail)
            }
        }
        _ => fail("cell expansion failed"),
    }
}

fn c4_two_loop() -> Outcome {
    let c = program("twoloop");
    let p = CellParams::default();
    let period = VerifyOptions::default().period;
    let loop_of = |s: State| if s == 0b00 || s == 0b11 { 0 } else { 1 };
    let mut bad = Vec::new();
    for s in 0..4u8 {
        for a in [false, true] {
            let got = check_transition(&c.pattern, s, a, period, DT, &p);
            let ok = match got {
                // Input 1: the other state of the same loop.
                Some(n) if a => n != s && loop_of(n) == loop_of(s),
                // Input 0: exactly one loop switch.
                Some(n) => loop_of(n) != loop_of(s),
                None => false,
            };
            if !ok {
                bad.push(format!("{}/A={} -> {}", state_label(s), a as u8, got.map_or("xx".into(), state_label)));
            }
        }
    }
    if bad.is_empty() {
        pass("8/8 transitions: A=1 alternates within loop, A=0 switches loop once per clock")
    } else {
        fail(format!("violations: {}", bad.join(", ")))
    }
}

fn c5_dilution() -> Outcome {
    let start = Instant::now();
    let want = [1.0, 0.5, 0.25, 0.125, 0.0625];
    let chip = match dilution_chip(&CellParams::default(), DILUTION_CLOCK) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let run = run_embedded(chip, LadderTopology::default(), &Script::default(), 4.5 * DILUTION_CLOCK, DT, 1_000_000);
    let co = match run {
        Ok((co, _)) => co,
        Err(e) => return fail(e.to_string()),
    };
    let got = co.plant.concentrations();
    let within = got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.01 * w);
    let mass_err = (co.plant.solute() - 1.0 - co.plant.refilled).abs();
    let elapsed = start.elapsed();
    let detail = format!(
        "rungs {:?}, mass error {mass_err:.1e}, {:.1}s",
        got.iter().map(|g| (g * 1e6).round() / 1e6).collect::<Vec<_>>(),
        elapsed.as_secs_f64()
    );
    if within && mass_err <= 1e-9 && elapsed < Duration::from_secs(120) {
        pass(detail)
    } else {
        fail(detail)
    }
}

/// Mixer script that leaves state 01 at `leave` (full run at 400).
fn mixer_script(leave: f64) -> String {
    format!(
        "150 press\n160 release\n240 press\n250 release\n{leave} press\n{} release\n{} end\n",
        leave + 10.0,
        leave + 260.0
    )
}

/// Final state, R1 and R2 ring fractions, and pump cycles spent in each state.
fn run_mixer(script: &str) -> Result<(Option<State>, f64, f64, [usize; 4]), String> {
    let script = Script::parse(script).map_err(|e| e.to_string())?;
    let chip = mixer_chip(&CellParams::default()).map_err(|e| e.to_string())?;
    let (co, _) = run_embedded(chip, MixerTopology::default(), &script, script.end_time(0.0), DT, 1_000_000)
        .map_err(|e| e.to_string())?;
    Ok((co.state(), co.plant.fraction(R1), co.plant.fraction(R2), co.cycles_in_state))
}

fn c6_mixer() -> Outcome {
    // Full scripted run through the chip.
    let full = match run_mixer(&mixer_script(400.0)) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let full_ok = full.0 == Some(0b00) && (full.2 - 1.0).abs() <= 1e-6;

    // State 01 skipped: the FSM cannot jump 11 -> 00, so the plant sees the
    // same mode sequence with no 01 cycles.
    let mut m = MixerTopology::default();
    let fill = m.segments.len();
    let seq = [(0b10, fill), (0b11, fill), (0b00, m.n_mix)];
    for (s, n) in seq {
        m.mixer_step(s, n).expect("valid state");
    }
    let skip = (m.fraction(R1), m.fraction(R2));
    let skip_ok = (skip.0 - 0.5).abs() <= 1e-6 && (skip.1 - 0.5).abs() <= 1e-6;

    // Ten 01 dwell times inside the fill window (about ten pump cycles).
    // Oracle: with the left half already R2, each 01 cycle displaces one
    // R1 segment.
    let mut sweep = Vec::new();
    let mut oracle_ok = true;
    for k in 0..10 {
        match run_mixer(&mixer_script(256.0 + 5.0 * k as f64)) {
            Ok((_, _, r2, cycles)) => {
                let want = (0.5 + cycles[0b01] as f64 / fill as f64).min(1.0);
                oracle_ok &= cycles[0b11] >= fill / 2 && (r2 - want).abs() <= 1e-9;
                sweep.push(r2);
            }
            Err(e) => return fail(e),
        }
    }
    let monotone = sweep.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let spread = sweep.last().unwrap() - sweep[0] > 0.1;
    let intermediate = sweep.iter().filter(|&&r| r > 0.5 + 1e-6 && r < 1.0 - 1e-6).count();

    let detail = format!(
        "full run state {} R2 {:.6}; skip-01 R1/R2 {:.6}/{:.6}; sweep {:?}{}",
        full.0.map_or("xx".into(), state_label),
        full.2,
        skip.0,
        skip.1,
        sweep.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>(),
        if oracle_ok { "" } else { " (differs from cycle-count oracle)" }
    );
    if full_ok && skip_ok && oracle_ok && monotone && spread && intermediate >= 10 {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn c7_min_period() -> Outcome {
    let p = CellParams::default();
    let start = VerifyOptions::default().period;
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["twoloop", "counter", "hold", "phase"] {
        let c = program(name);
        let coarse = min_period(&c.pattern, &c.table, start, DT, &p);
        let fine = min_period(&c.pattern, &c.table, start, DT / 2.0, &p);
        match (coarse, fine) {
            (Some(a), Some(b)) => {
                let rel = (a - b).abs() / a;
                ok &= rel < 0.05;
                notes.push(format!("{name} {a:.3}/{b:.3} ({:.2}%)", 100.0 * rel));
            }
            _ => {
                ok = false;
                notes.push(format!("{name}: no passing period"));
            }
        }
    }
    let detail = format!("min period at dt/dt÷2: {}", notes.join(", "));
    if ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn c8_restoration() -> Outcome {
    let p = CellParams::default();
    let net = expand_not("u1", "in", "mid", &p)
        .and_then(|mut n| expand_not("u2", "mid", "out", &p).and_then(|m| n.union(&m).map(|_| n).map_err(Into::into)));
    let net = match net {
        Ok(n) => n,
        Err(e) => return fail(e.to_string()),
    };
    let solver = QuasiStaticSolver::new(&net);
    let grid: Vec<f64> = (0..32)
        .map(|k| 0.65 * k as f64 / 31.0)
        .chain((0..32).map(|k| 0.75 + 0.25 * k as f64 / 31.0))
        .collect();
    let mut bad = Vec::new();
    for &x in &grid {
        let high = x >= 0.75;
        // Static solve.
        let q = match solver.solve_driven(&IndexMap::from([("in".to_string(), x)])) {
            Ok(q) => q,
            Err(e) => return fail(e.to_string()),
        };
        let (mid, out) = (q.pressures["mid"], q.pressures["out"]);
        let static_ok = if high { mid <= 0.01 && out == 1.0 } else { mid == 1.0 && out <= 0.01 };
        // Timed settle from rest.
        let timed_ok = Simulator::new(&net, DT)
            .and_then(|mut sim| {
                sim.set_drive("in", Some(x))?;
                sim.run_until(30.0);
                let out = sim.pressure("out").unwrap_or(f64::NAN);
                Ok(read_logic(out) == if high { LogicLevel::One } else { LogicLevel::Zero }
                    && if high { (out - 1.0).abs() <= 0.01 } else { out <= 0.01 })
            })
            .unwrap_or(false);
        if !(static_ok && timed_ok) {
            bad.push(format!("{x:.3}"));
        }
    }
    if bad.is_empty() {
        pass(format!("{} grid points restored (static and timed)", grid.len()))
    } else {
        fail(format!("not restored at inputs {}", bad.join(" ")))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("PLA faithfulness", c1_pla_faithfulness),
        ("example programs", c2_example_programs),
        ("structural counts", c3_structural_counts),
        ("two-loop FSM", c4_two_loop),
        ("serial dilution", c5_dilution),
        ("rotary mixer", c6_mixer),
        ("max-clock reporting", c7_min_period),
        ("gain/restoration", c8_restoration),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
