//! Newline-delimited JSON messages. Every message carries `"v": 1`.

use std::collections::BTreeMap;
use serde::{Deserialize, Serialize};

use crate::fluidics::Compartment;

pub const PROTOCOL_VERSION: u64 = 1;

/// Client to server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Load { profile: String },
    Start,
    Pause,
    PressButton,
    ReleaseButton,
    Step { n: u64 },
    Snapshot,
    Reset,
}

/// Parses one line; the error string is sent back to the client.
pub fn parse_command(line: &str) -> Result<Command, String> {
    let mut value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("malformed message: {e}"))?;
    let obj = value.as_object_mut().ok_or("message must be a JSON object")?;
    match obj.remove("v").and_then(|v| v.as_u64()) {
        Some(PROTOCOL_VERSION) => {}
        Some(v) => return Err(format!("unsupported protocol version {v}")),
        None => return Err("missing protocol version \"v\"".into()),
    }
    serde_json::from_value(value).map_err(|e| format!("bad command: {e}"))
}

pub fn command_line(cmd: &Command) -> String {
    let mut v = serde_json::to_value(cmd).expect("commands serialize");
    v.as_object_mut()
        .expect("tagged enum is an object")
        .insert("v".into(), PROTOCOL_VERSION.into());
    v.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub profile: String,
    pub sim_time: f64,
    pub tick: u64,
    pub running: bool,
    /// Register state as two bits, null when a bit reads UNKNOWN.
    pub fsm_state: Option<String>,
    pub valves: BTreeMap<String, bool>,
    pub probes: BTreeMap<String, f64>,
    pub plant: Vec<Compartment>,
    pub pump_cycles: usize,
    pub button_covered: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placed {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// Presentational chip layout consumed by the browser panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layout {
    pub valves: Vec<Placed>,
    pub probes: Vec<Placed>,
    pub button: Option<Point>,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Snapshot(Snapshot),
    Layout { profile: String, layout: Layout },
    Error { message: String },
}

impl Message {
    pub fn to_line(&self) -> String {
        let mut v = serde_json::to_value(self).expect("messages serialize");
        let obj = v.as_object_mut().expect("tagged enum is an object");
        obj.insert("v".into(), PROTOCOL_VERSION.into());
        v.to_string()
    }

    pub fn error(message: impl Into<String>) -> Self {
        Message::Error { message: message.into() }
    }
}
