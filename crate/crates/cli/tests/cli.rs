use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pneuma");

fn programs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/programs")
}

fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn pneuma(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("PNEUMA_CONFIG")
        .output()
        .expect("spawn pneuma")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn compile_into(dir: &Path, prog: &str) -> PathBuf {
    let src = programs().join(format!("{prog}.fsm"));
    let out = dir.join(format!("{prog}.membrane"));
    let o = pneuma(&["compile", src.to_str().unwrap(), "-o", out.to_str().unwrap()], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn compile_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    for prog in ["twoloop", "counter", "hold", "phase"] {
        let src = programs().join(format!("{prog}.fsm"));
        let out = dir.path().join("x.membrane");
        let o = pneuma(
            &["compile", src.to_str().unwrap(), "-o", out.to_str().unwrap(), "--table", "--sop"],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{prog}: {}", stderr(&o));
        assert_eq!(stdout(&o), golden(&format!("{prog}.compile.txt")), "{prog}");
        assert_eq!(fs::read_to_string(&out).unwrap(), golden(&format!("{prog}.membrane")), "{prog}");
    }
}

#[test]
fn compile_default_output_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(programs().join("phase.fsm"), dir.path().join("m.fsm")).unwrap();
    let o = pneuma(&["compile", "m.fsm"], dir.path());
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("m.membrane")).unwrap(), golden("phase.membrane"));
}

#[test]
fn capacity_overflow_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let src = programs().join("overflow.fsm");
    let o = pneuma(&["compile", src.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("products 5 > 4"), "{}", stderr(&o));
    assert!(!dir.path().join("overflow.membrane").exists());
}

#[test]
fn malformed_program_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.fsm"), "fsm bad\nbits 2\ninput A\nfrom 00 A=0 -> 01\n").unwrap();
    let o = pneuma(&["compile", "bad.fsm"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn truthtable_matches_golden_and_detects_stuck_valve() {
    let dir = tempfile::tempdir().unwrap();
    let m = compile_into(dir.path(), "hold");
    let m = m.to_str().unwrap();
    let o = pneuma(&["truthtable", "--membrane", m], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), golden("hold.truthtable.tsv"));

    // P4 is the single-literal row S0'; its NAND input valve stuck open
    // makes the row read true everywhere.
    let o = pneuma(&["truthtable", "--membrane", m, "--inject-stuck-open", "pla.p4.v0"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("differ"), "{}", stderr(&o));

    let o = pneuma(&["truthtable", "--membrane", m, "--inject-stuck-open", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_membrane_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = pneuma(&["simulate", "--membrane", "absent.membrane"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.membrane"));
    let o = pneuma(&["truthtable", "--membrane", "absent.membrane"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstable_dt_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = compile_into(dir.path(), "phase");
    let o = pneuma(
        &["simulate", "--membrane", m.to_str().unwrap(), "--dt", "0.05", "--t-end", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unstable"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pneuma(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(pneuma(&["simulate"], dir.path()).status.code(), Some(2));
}

/// Level of each signal at `t`, replayed from a parsed dump.
fn levels_at(text: &str, signals: &[&str], times: &[f64]) -> Vec<Vec<vcd::Value>> {
    let mut parser = vcd::Parser::new(text.as_bytes());
    let header = parser.parse_header().unwrap();
    let (mult, unit) = header.timescale.unwrap();
    let per_unit = match unit {
        vcd::TimescaleUnit::S => 1.0,
        vcd::TimescaleUnit::MS => 1e3,
        vcd::TimescaleUnit::US => 1e6,
        vcd::TimescaleUnit::NS => 1e9,
        other => panic!("unexpected unit {other:?}"),
    } / mult as f64;
    let codes: HashMap<vcd::IdCode, usize> = signals
        .iter()
        .enumerate()
        .map(|(i, s)| (header.find_var(&["pneuma", s]).unwrap().code, i))
        .collect();
    let mut current = vec![vcd::Value::X; signals.len()];
    let mut out = Vec::new();
    let mut next = 0;
    while let Some(cmd) = parser.next().transpose().unwrap() {
        match cmd {
            vcd::Command::Timestamp(t) => {
                while next < times.len() && times[next] * per_unit < t as f64 {
                    out.push(current.clone());
                    next += 1;
                }
            }
            vcd::Command::ChangeScalar(id, v) => {
                if let Some(&i) = codes.get(&id) {
                    current[i] = v;
                }
            }
            _ => {}
        }
    }
    while next < times.len() {
        out.push(current.clone());
        next += 1;
    }
    out
}

#[test]
fn phase_dump_alternates_00_11_with_input_low() {
    let dir = tempfile::tempdir().unwrap();
    let m = compile_into(dir.path(), "phase");
    fs::write(dir.path().join("a.stim"), "0 A 0\n").unwrap();
    let o = pneuma(
        &[
            "simulate",
            "--membrane",
            m.to_str().unwrap(),
            "--stimulus",
            "a.stim",
            "--clock",
            "CLK period=40 duty=0.5 phase=20",
            "--t-end",
            "430",
            "--vcd",
            "out.vcd",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out.vcd")).unwrap();
    // Falling edges at 40, 80, ...; sample mid-cycle.
    let times: Vec<f64> = (0..10).map(|k| 60.0 + 40.0 * k as f64).collect();
    let got = levels_at(&text, &["S1", "S0"], &times);
    for (k, v) in got.iter().enumerate() {
        let want = if k % 2 == 0 { vcd::Value::V1 } else { vcd::Value::V0 };
        assert_eq!(v, &vec![want, want], "cycle {k}");
    }
}

#[test]
fn verify_reports_every_transition() {
    let dir = tempfile::tempdir().unwrap();
    let src = programs().join("counter.fsm");
    let o = pneuma(&["verify", src.to_str().unwrap(), "--no-search"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.ends_with("\tpass")).count(), 8);

    // A membrane for a different machine fails against this program.
    let wrong = compile_into(dir.path(), "phase");
    let o = pneuma(
        &["verify", src.to_str().unwrap(), "--membrane", wrong.to_str().unwrap(), "--no-search"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn dilution_demo_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = pneuma(&["demo", "dilution", "--history", "h.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), golden("dilution.tsv"));
    let h = fs::read_to_string(dir.path().join("h.tsv")).unwrap();
    assert!(h.starts_with("cycle\tcompartment\tsource\tfraction\n"));
}

#[test]
fn mixer_demo_with_script_file() {
    let dir = tempfile::tempdir().unwrap();
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/presses.tsv");
    let o = pneuma(&["demo", "mixer", "--script", script.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("# final state 00"), "{out}");
    assert!(out.contains("ring\tR2\t1.000000000"), "{out}");

    fs::write(dir.path().join("late.tsv"), "10 press\n5 release\n").unwrap();
    let o = pneuma(&["demo", "mixer", "--script", "late.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let m = compile_into(dir.path(), "phase");
    fs::write(dir.path().join("pneuma.toml"), "dt = 0.05\n").unwrap();
    let o = pneuma(&["simulate", "--membrane", m.to_str().unwrap(), "--t-end", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2), "dt from ./pneuma.toml should be rejected");
    fs::write(dir.path().join("pneuma.toml"), "bogus = 1\n").unwrap();
    let o = pneuma(&["simulate", "--membrane", m.to_str().unwrap(), "--t-end", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_sample_netlists() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts");
    for f in ["ring5.net", "double_not.net"] {
        let o = pneuma(&["validate", root.join(f).to_str().unwrap()], &root);
        assert_eq!(o.status.code(), Some(0), "{f}: {}", stderr(&o));
        assert!(stdout(&o).contains("0 diagnostics"), "{f}");
    }
}

#[test]
fn empty_membrane_gives_all_zero_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = "MEMBRANE v1\nliterals: S1 S1n S0 S0n A An\nAND P1:\nAND P2:\nAND P3:\nAND P4:\nOR N1:\nOR N0:\n";
    fs::write(dir.path().join("empty.membrane"), empty).unwrap();
    let o = pneuma(&["truthtable", "--membrane", "empty.membrane"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(str::to_string).collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        assert!(r.ends_with("\t0\t0\t0\t0"), "{r}");
    }
}

#[test]
fn unknown_demo_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pneuma(&["demo", "blender"], dir.path()).status.code(), Some(2));
}
