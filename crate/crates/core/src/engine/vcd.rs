use std::fmt::Write;

use super::timed::Waveform;
use super::LogicLevel;

const UNITS: [&str; 6] = ["s", "ms", "us", "ns", "ps", "fs"];

/// Largest power-of-ten unit that divides `dt`, as (exponent k with
/// unit = 10^-k, ticks per step).
fn time_base(dt: f64) -> (u32, u64) {
    for k in 0..=15u32 {
        let scaled = dt * 10f64.powi(k as i32);
        let ticks = scaled.round();
        if ticks >= 1.0 && (scaled - ticks).abs() <= 1e-9 * scaled {
            return (k, ticks as u64);
        }
    }
    (15, (dt * 1e15).round().max(1.0) as u64)
}

fn timescale(k: u32) -> String {
    let u = k.div_ceil(3);
    let mantissa = 10u64.pow(3 * u - k);
    format!("{mantissa} {}", UNITS[u as usize])
}

fn code(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (i % 94) as u8) as char);
        i /= 94;
        if i == 0 {
            break;
        }
        i -= 1;
    }
    s
}

fn bit(level: LogicLevel) -> char {
    match level {
        LogicLevel::Zero => '0',
        LogicLevel::One => '1',
        LogicLevel::Unknown => 'x',
    }
}

/// Writes a value-change dump of the selected signals (all recorded signals
/// when `selection` is `None`). Node signals dump their logic level; valve
/// signals dump 1 while open. One second of dump time is one simulation
/// time unit.
pub fn export_vcd(w: &Waveform, selection: Option<&[&str]>) -> String {
    let names: Vec<&str> = w
        .initial
        .keys()
        .map(String::as_str)
        .filter(|n| selection.is_none_or(|sel| sel.contains(n)))
        .collect();
    let (k, ticks_per_step) = time_base(w.dt);

    let mut out = String::new();
    let _ = writeln!(out, "$comment pneuma waveform, dt = {} $end", w.dt);
    let _ = writeln!(out, "$timescale {} $end", timescale(k));
    let _ = writeln!(out, "$scope module pneuma $end");
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, "$var wire 1 {} {} $end", code(i), name);
    }
    let _ = writeln!(out, "$upscope $end");
    let _ = writeln!(out, "$enddefinitions $end");

    let _ = writeln!(out, "#{}", w.start_step * ticks_per_step);
    let _ = writeln!(out, "$dumpvars");
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, "{}{}", bit(w.initial[*name]), code(i));
    }
    let _ = writeln!(out, "$end");

    let mut current = None;
    for e in &w.events {
        let Some(i) = names.iter().position(|n| *n == e.signal) else {
            continue;
        };
        if current != Some(e.step) {
            let _ = writeln!(out, "#{}", e.step * ticks_per_step);
            current = Some(e.step);
        }
        let _ = writeln!(out, "{}{}", bit(e.new), code(i));
    }
    if !w.is_empty() {
        let last = w.step_of(w.len() - 1);
        if current.map_or(last > w.start_step, |s| last > s) {
            let _ = writeln!(out, "#{}", last * ticks_per_step);
        }
    }
    out
}
