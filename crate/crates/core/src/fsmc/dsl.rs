use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

/// State code: bit 1 is S1, bit 0 is S0.
pub type State = u8;

pub const STATE_BITS: usize = 2;
pub const NUM_STATES: usize = 1 << STATE_BITS;

pub fn state_label(s: State) -> String {
    format!("{:02b}", s)
}

pub fn parse_state(label: &str) -> Option<State> {
    if label.len() == STATE_BITS && label.bytes().all(|b| b == b'0' || b == b'1') {
        u8::from_str_radix(label, 2).ok()
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FsmErrorKind {
    Syntax(String),
    Missing { state: State, input: String, value: bool },
    Duplicate { state: State, input: String, value: bool },
    UnknownState(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct FsmError {
    pub line: usize,
    pub kind: FsmErrorKind,
}

impl fmt::Display for FsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: ", self.line)?;
        }
        match &self.kind {
            FsmErrorKind::Syntax(m) => f.write_str(m),
            FsmErrorKind::Missing { state, input, value } => write!(
                f,
                "transitions not total: no rule for state {} on {input}={}",
                state_label(*state),
                *value as u8
            ),
            FsmErrorKind::Duplicate { state, input, value } => write!(
                f,
                "duplicate transition for state {} on {input}={}",
                state_label(*state),
                *value as u8
            ),
            FsmErrorKind::UnknownState(s) => write!(f, "unknown state label '{s}'"),
        }
    }
}

/// A validated 2-bit, 1-input Moore machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDiagram {
    pub name: String,
    pub state_bits: usize,
    pub input: String,
    pub initial: State,
    /// Total map (state, input value) -> next state.
    pub transitions: BTreeMap<(State, bool), State>,
    /// Moore output name -> state in which it is active.
    pub outputs: IndexMap<String, State>,
}

impl StateDiagram {
    pub fn next(&self, state: State, a: bool) -> State {
        self.transitions[&(state, a)]
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> FsmError {
    FsmError {
        line,
        kind: FsmErrorKind::Syntax(msg.into()),
    }
}

fn state_at(line: usize, label: &str) -> Result<State, FsmError> {
    parse_state(label).ok_or_else(|| FsmError {
        line,
        kind: FsmErrorKind::UnknownState(label.to_string()),
    })
}

/// Parses `<lhs> -> <state>` where lhs is `default` or `<input>=<0|1>`.
fn parse_rule(line: usize, text: &str, input: &str) -> Result<(Option<bool>, State), FsmError> {
    let (lhs, rhs) = text
        .split_once("->")
        .ok_or_else(|| syntax(line, format!("expected '->' in '{text}'")))?;
    let target = state_at(line, rhs.trim())?;
    let lhs = lhs.trim();
    if lhs == "default" {
        return Ok((None, target));
    }
    let (name, value) = lhs
        .split_once('=')
        .ok_or_else(|| syntax(line, format!("expected '{input}=<0|1>' or 'default', got '{lhs}'")))?;
    if name.trim() != input {
        return Err(syntax(line, format!("unknown input '{}'", name.trim())));
    }
    let value = match value.trim() {
        "0" => false,
        "1" => true,
        v => return Err(syntax(line, format!("input value must be 0 or 1, got '{v}'"))),
    };
    Ok((Some(value), target))
}

/// Parses the state-diagram language. A `default -> S` rule inside a `from`
/// block fills that state's missing input values; a top-level `default`
/// fills every missing pair.
pub fn parse_fsm(text: &str) -> Result<StateDiagram, FsmError> {
    let mut name = None;
    let mut bits = None;
    let mut input: Option<String> = None;
    let mut initial = None;
    let mut global_default: Option<State> = None;
    let mut rules: BTreeMap<(State, bool), State> = BTreeMap::new();
    let mut block_defaults: BTreeMap<State, State> = BTreeMap::new();
    let mut outputs = IndexMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (keyword, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        let rest = rest.trim();
        if name.is_none() && keyword != "fsm" {
            return Err(syntax(line, "document must start with 'fsm <name>'"));
        }
        match keyword {
            "fsm" => {
                if name.is_some() {
                    return Err(syntax(line, "repeated 'fsm' header"));
                }
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(syntax(line, "expected 'fsm <name>'"));
                }
                name = Some(rest.to_string());
            }
            "bits" => {
                let n: usize = rest.parse().map_err(|_| syntax(line, format!("bad bit count '{rest}'")))?;
                if n != STATE_BITS {
                    return Err(syntax(line, format!("device supports {STATE_BITS} state bits, got {n}")));
                }
                bits = Some(n);
            }
            "input" => {
                if input.is_some() {
                    return Err(syntax(line, "device supports exactly one input"));
                }
                if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(syntax(line, format!("bad input name '{rest}'")));
                }
                input = Some(rest.to_string());
            }
            "initial" => initial = Some(state_at(line, rest)?),
            "default" => {
                let target = rest
                    .strip_prefix("->")
                    .ok_or_else(|| syntax(line, "expected 'default -> <state>'"))?;
                global_default = Some(state_at(line, target.trim())?);
            }
            "from" => {
                let inp = input.as_deref().ok_or_else(|| syntax(line, "'input' must precede 'from'"))?;
                let (label, list) = rest
                    .split_once(':')
                    .ok_or_else(|| syntax(line, "expected 'from <state>: <rules>'"))?;
                let state = state_at(line, label.trim())?;
                for rule in list.split(';').map(str::trim).filter(|r| !r.is_empty()) {
                    match parse_rule(line, rule, inp)? {
                        (Some(value), target) => {
                            if rules.insert((state, value), target).is_some() {
                                return Err(FsmError {
                                    line,
                                    kind: FsmErrorKind::Duplicate {
                                        state,
                                        input: inp.to_string(),
                                        value,
                                    },
                                });
                            }
                        }
                        (None, target) => {
                            if block_defaults.insert(state, target).is_some() {
                                return Err(syntax(line, format!("repeated default for state {}", state_label(state))));
                            }
                        }
                    }
                }
            }
            "output" => {
                // The keyword was split off the first declaration only.
                for decl in body.split(';').map(str::trim).filter(|d| !d.is_empty()) {
                    let decl = decl
                        .strip_prefix("output")
                        .ok_or_else(|| syntax(line, format!("expected 'output', got '{decl}'")))?;
                    let (oname, cond) = decl
                        .split_once('=')
                        .ok_or_else(|| syntax(line, "expected 'output <name> = state==<state>'"))?;
                    let cond = cond.trim();
                    let label = cond
                        .strip_prefix("=state==")
                        .or_else(|| cond.strip_prefix("= state=="))
                        .or_else(|| cond.strip_prefix("state=="))
                        .ok_or_else(|| syntax(line, format!("expected 'state==<state>', got '{cond}'")))?;
                    let oname = oname.trim();
                    if oname.is_empty() {
                        return Err(syntax(line, "output needs a name"));
                    }
                    if outputs.insert(oname.to_string(), state_at(line, label.trim())?).is_some() {
                        return Err(syntax(line, format!("repeated output '{oname}'")));
                    }
                }
            }
            other => return Err(syntax(line, format!("unknown statement '{other}'"))),
        }
    }

    let name = name.ok_or_else(|| syntax(0, "empty document"))?;
    let _ = bits.ok_or_else(|| syntax(0, "missing 'bits'"))?;
    let input = input.ok_or_else(|| syntax(0, "missing 'input'"))?;
    let initial = initial.ok_or_else(|| syntax(0, "missing 'initial'"))?;

    let mut transitions = BTreeMap::new();
    for state in 0..NUM_STATES as State {
        for value in [false, true] {
            let next = rules
                .get(&(state, value))
                .or_else(|| block_defaults.get(&state))
                .or(global_default.as_ref())
                .copied()
                .ok_or_else(|| FsmError {
                    line: 0,
                    kind: FsmErrorKind::Missing {
                        state,
                        input: input.clone(),
                        value,
                    },
                })?;
            transitions.insert((state, value), next);
        }
    }
    Ok(StateDiagram {
        name,
        state_bits: STATE_BITS,
        input,
        initial,
        transitions,
        outputs,
    })
}
