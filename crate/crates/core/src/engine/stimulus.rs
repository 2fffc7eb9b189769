use std::collections::HashMap;

use super::EngineError;

/// Periodic square wave: high for `duty * period` starting at `phase`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clock {
    pub period: f64,
    pub duty: f64,
    pub phase: f64,
}

impl Clock {
    pub fn new(period: f64, duty: f64, phase: f64) -> Result<Self, EngineError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(EngineError::Invalid(format!("clock period must be > 0, got {period}")));
        }
        if !(duty > 0.0 && duty < 1.0) {
            return Err(EngineError::Invalid(format!("clock duty must lie in (0, 1), got {duty}")));
        }
        Ok(Clock { period, duty, phase })
    }

    pub fn high(&self, t: f64) -> bool {
        (t - self.phase).rem_euclid(self.period) < self.duty * self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    /// Pin the node at this pressure. On a port, `>= 0.5` means covered.
    Level(f64),
    /// Let the node float again. On a port, uncovers it.
    Release,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimEvent {
    pub time: f64,
    /// Node or port id.
    pub target: String,
    pub drive: Drive,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stimulus {
    pub events: Vec<StimEvent>,
    pub clocks: Vec<(String, Clock)>,
}

impl Stimulus {
    pub fn new() -> Self {
        Stimulus::default()
    }

    pub fn at(mut self, time: f64, target: &str, drive: Drive) -> Self {
        self.events.push(StimEvent {
            time,
            target: target.to_string(),
            drive,
        });
        self
    }

    pub fn clock(mut self, node: &str, clock: Clock) -> Self {
        self.clocks.push((node.to_string(), clock));
        self
    }

    /// Events in application order: by time, ties kept in insertion order.
    pub fn sorted_events(&self) -> Vec<&StimEvent> {
        let mut ev: Vec<&StimEvent> = self.events.iter().collect();
        ev.sort_by(|a, b| a.time.total_cmp(&b.time));
        ev
    }

    /// Times must be finite, non-negative and non-decreasing per target.
    pub fn check_order(&self) -> Result<(), EngineError> {
        let mut last: HashMap<&str, f64> = HashMap::new();
        for e in &self.events {
            if !(e.time.is_finite() && e.time >= 0.0) {
                return Err(EngineError::Invalid(format!("bad stimulus time {} for '{}'", e.time, e.target)));
            }
            if let Some(&prev) = last.get(e.target.as_str()) {
                if e.time < prev {
                    return Err(EngineError::Invalid(format!(
                        "stimulus times for '{}' decrease ({} after {})",
                        e.target, e.time, prev
                    )));
                }
            }
            last.insert(&e.target, e.time);
        }
        Ok(())
    }
}

fn number(line: usize, text: &str, what: &str) -> Result<f64, EngineError> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| EngineError::Stimulus {
            line,
            message: format!("bad {what} '{text}'"),
        })
}

/// Parses `clock <node> period=<f> duty=<f> [phase=<f>]`.
pub fn parse_clock_spec(spec: &str) -> Result<(String, Clock), EngineError> {
    parse_clock_line(0, spec)
}

fn parse_clock_line(line: usize, text: &str) -> Result<(String, Clock), EngineError> {
    let err = |message: String| EngineError::Stimulus { line, message };
    let mut words = text.split_whitespace();
    if words.next() != Some("clock") {
        return Err(err("expected 'clock'".into()));
    }
    let node = words.next().ok_or_else(|| err("clock needs a node".into()))?;
    let (mut period, mut duty, mut phase) = (None, None, None);
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| err(format!("expected key=value, got '{w}'")))?;
        let slot = match k {
            "period" => &mut period,
            "duty" => &mut duty,
            "phase" => &mut phase,
            _ => return Err(err(format!("unknown key '{k}'"))),
        };
        if slot.replace(number(line, v, k)?).is_some() {
            return Err(err(format!("repeated key '{k}'")));
        }
    }
    let period = period.ok_or_else(|| err("clock needs period=".into()))?;
    let duty = duty.ok_or_else(|| err("clock needs duty=".into()))?;
    let clock = Clock::new(period, duty, phase.unwrap_or(0.0)).map_err(|e| err(e.to_string()))?;
    Ok((node.to_string(), clock))
}

/// Parses a stimulus file: `time node value` rows with value in {0, 1, z},
/// plus `clock` lines. `#` starts a comment; a leading `time node value`
/// header row is skipped.
pub fn parse_stimulus(text: &str) -> Result<Stimulus, EngineError> {
    let mut stim = Stimulus::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with("clock") && body.split_whitespace().next() == Some("clock") {
            stim.clocks.push(parse_clock_line(line, body)?);
            continue;
        }
        let cols: Vec<&str> = body.split_whitespace().collect();
        if cols == ["time", "node", "value"] {
            continue;
        }
        let [t, node, value] = cols[..] else {
            return Err(EngineError::Stimulus {
                line,
                message: format!("expected 3 columns, got {}", cols.len()),
            });
        };
        let drive = match value {
            "0" => Drive::Level(0.0),
            "1" => Drive::Level(1.0),
            "z" | "Z" => Drive::Release,
            _ => {
                return Err(EngineError::Stimulus {
                    line,
                    message: format!("value must be 0, 1 or z, got '{value}'"),
                })
            }
        };
        stim.events.push(StimEvent {
            time: number(line, t, "time")?,
            target: node.to_string(),
            drive,
        });
    }
    stim.check_order()?;
    Ok(stim)
}
