//! `key = value` configuration files (TOML syntax).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::fluidics::{LadderTopology, MixerTopology, LADDER_LINES, N_MIX, PUMP_Q};
use crate::fluidics::cosim::DILUTION_CLOCK;
use crate::stdcells::CellParams;

/// Overrides the engine config path.
pub const CONFIG_ENV: &str = "PNEUMA_CONFIG";
/// Looked up in the working directory when no path is given.
pub const DEFAULT_CONFIG_FILE: &str = "pneuma.toml";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

/// Engine and cell defaults used by the CLI and the panel service.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub dt: f64,
    /// Clock period for verify runs.
    pub period: f64,
    pub g_pullup: f64,
    pub g_open: f64,
    pub theta_open: f64,
    pub theta_close: f64,
    pub capacitance: f64,
    pub g_via: f64,
    pub g_short: f64,
    /// Panel pacing: wall-clock milliseconds per simulated time unit.
    pub pacing_ms: f64,
    /// Panel tick in simulated time units.
    pub tick: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let p = CellParams::default();
        EngineConfig {
            dt: 1e-3,
            period: 40.0,
            g_pullup: p.g_pullup,
            g_open: p.g_open,
            theta_open: p.theta_open,
            theta_close: p.theta_close,
            capacitance: p.capacitance,
            g_via: p.g_via,
            g_short: p.g_short,
            pacing_ms: 100.0,
            tick: 0.5,
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: EngineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let positive = [
            ("dt", self.dt),
            ("period", self.period),
            ("g_pullup", self.g_pullup),
            ("g_open", self.g_open),
            ("capacitance", self.capacitance),
            ("g_via", self.g_via),
            ("g_short", self.g_short),
            ("tick", self.tick),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{k} must be positive, got {v}")));
            }
        }
        if !(0.0 < self.theta_close && self.theta_close < self.theta_open && self.theta_open < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "need 0 < theta_close < theta_open < 1, got {} and {}",
                self.theta_close, self.theta_open
            )));
        }
        if self.pacing_ms < 0.0 {
            return Err(ConfigError::Invalid("pacing_ms must be >= 0".into()));
        }
        Ok(())
    }

    /// Explicit path, else `$PNEUMA_CONFIG`, else `pneuma.toml` if present,
    /// else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
            .or_else(|| Some(PathBuf::from(DEFAULT_CONFIG_FILE)).filter(|p| p.exists()));
        match path {
            Some(p) => Self::parse(&read(&p)?),
            None => Ok(Self::default()),
        }
    }

    pub fn cell_params(&self) -> CellParams {
        CellParams {
            g_pullup: self.g_pullup,
            g_open: self.g_open,
            theta_open: self.theta_open,
            theta_close: self.theta_close,
            capacitance: self.capacitance,
            g_via: self.g_via,
            g_short: self.g_short,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Mixer,
    Ladder,
}

/// Plant parameters: a named topology plus overrides.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub topology: Topology,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_n_mix")]
    pub n_mix: usize,
    #[serde(default = "default_ring_volume")]
    pub ring_volume: f64,
    #[serde(default = "default_rungs")]
    pub rung_volumes: Vec<f64>,
    #[serde(default = "default_clock")]
    pub clock_period: f64,
}

fn default_q() -> f64 {
    PUMP_Q
}
fn default_n_mix() -> usize {
    N_MIX
}
fn default_ring_volume() -> f64 {
    1.0
}
fn default_rungs() -> Vec<f64> {
    vec![1.0; LADDER_LINES + 1]
}
fn default_clock() -> f64 {
    DILUTION_CLOCK
}

impl PlantConfig {
    pub fn named(topology: Topology) -> Self {
        PlantConfig {
            topology,
            q: PUMP_Q,
            n_mix: N_MIX,
            ring_volume: 1.0,
            rung_volumes: default_rungs(),
            clock_period: DILUTION_CLOCK,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: PlantConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        if !(c.q > 0.0 && c.q <= c.ring_volume / 2.0) {
            return Err(ConfigError::Invalid(format!("q must be in (0, ring_volume/2], got {}", c.q)));
        }
        if c.n_mix == 0 {
            return Err(ConfigError::Invalid("n_mix must be >= 1".into()));
        }
        if c.rung_volumes.len() != LADDER_LINES + 1 || c.rung_volumes.iter().any(|v| !(*v > 0.0)) {
            return Err(ConfigError::Invalid(format!(
                "rung_volumes needs {} positive entries",
                LADDER_LINES + 1
            )));
        }
        if !(c.clock_period > 0.0) {
            return Err(ConfigError::Invalid("clock_period must be positive".into()));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?)
    }

    pub fn mixer(&self) -> MixerTopology {
        MixerTopology::new(self.ring_volume, self.q, self.n_mix, crate::fluidics::pure("air"))
    }

    pub fn ladder(&self) -> LadderTopology {
        LadderTopology::new(&self.rung_volumes, self.n_mix)
    }
}
