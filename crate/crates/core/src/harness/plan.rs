//! Experiment plans from flat `key = value` files.
//!
//! Lines are `key = value`; `#` starts a comment; list values are
//! comma-separated. Any key left out keeps its default.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::meadsr::DEFAULT_WAIT_TIME_S;
use crate::sim::config::{Protocol, SimConfig};

pub const DEFAULT_PAUSE_TIMES_S: [f64; 6] = [0.0, 30.0, 60.0, 120.0, 300.0, 600.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub base: SimConfig,
    pub pause_times_s: Vec<f64>,
    pub wait_times_s: Vec<f64>,
    pub protocols: Vec<Protocol>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            base: SimConfig::default(),
            pause_times_s: DEFAULT_PAUSE_TIMES_S.to_vec(),
            wait_times_s: vec![DEFAULT_WAIT_TIME_S],
            protocols: vec![Protocol::MeaDsr, Protocol::Dsr],
            seeds: (1..=10).collect(),
        }
    }
}

/// One simulation of a plan, identified by its sweep coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub protocol: Protocol,
    pub pause_time_s: f64,
    /// `None` for protocols without a wait window.
    pub wait_time_s: Option<f64>,
    pub seed: u64,
}

impl RunSpec {
    pub fn config(&self, base: &SimConfig) -> SimConfig {
        SimConfig {
            protocol: self.protocol,
            pause_time_s: self.pause_time_s,
            wait_time_s: self.wait_time_s.unwrap_or(base.wait_time_s),
            seed: self.seed,
            ..base.clone()
        }
    }
}

impl ExperimentPlan {
    /// Every run in output order: protocol, pause time, wait time, seed.
    /// DSR has no wait window, so it is not crossed with the wait times.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for &protocol in &self.protocols {
            let wait_times: Vec<Option<f64>> = match protocol {
                Protocol::MeaDsr => self.wait_times_s.iter().copied().map(Some).collect(),
                Protocol::Dsr => vec![None],
            };
            for &pause_time_s in &self.pause_times_s {
                for &wait_time_s in &wait_times {
                    for &seed in &self.seeds {
                        out.push(RunSpec { protocol, pause_time_s, wait_time_s, seed });
                    }
                }
            }
        }
        out
    }

    pub fn with_seed_count(mut self, n: u64) -> Self {
        let first = self.seeds.first().copied().unwrap_or(1);
        self.seeds = (first..first + n).collect();
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.pause_times_s.is_empty() {
            return invalid("pause_times is empty");
        }
        if self.wait_times_s.is_empty() {
            return invalid("wait_times is empty");
        }
        if self.protocols.is_empty() {
            return invalid("protocols is empty");
        }
        if self.seeds.is_empty() {
            return invalid("no seeds to run");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return invalid("seeds must be distinct");
        }
        if self.pause_times_s.iter().chain(&self.wait_times_s).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("pause and wait times must be non-negative");
        }
        self.base.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn scalar<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| format!("invalid value {v:?}: {e}"))
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',').filter(|s| !s.trim().is_empty()).map(scalar).collect()
}

fn pair(v: &str) -> Result<(f64, f64), String> {
    match list::<f64>(v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        other => Err(format!("expected two comma-separated numbers, got {}", other.len())),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentPlan, ConfigError> {
    let mut plan = ExperimentPlan::default();
    let mut seed0: Option<u64> = None;
    let mut seed_count: Option<u64> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError::Parse { line: line_no, message };
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let b = &mut plan.base;
        let res: Result<(), String> = match key {
            "node_count" => scalar(value).map(|v| b.node_count = v),
            "area_m" => pair(value).map(|v| b.area_m = v),
            "tx_range_m" => scalar(value).map(|v| b.tx_range_m = v),
            "bitrate_bps" => scalar(value).map(|v| b.bitrate_bps = v),
            "speed_range_mps" => pair(value).map(|v| b.speed_range_mps = v),
            "sim_duration_s" => scalar(value).map(|v| b.sim_duration_s = v),
            "connections" => scalar(value).map(|v| b.connections = v),
            "cbr_rate_pps" => scalar(value).map(|v| b.cbr_rate_pps = v),
            "payload_bytes" => scalar(value).map(|v| b.payload_bytes = v),
            "flow_start_window_s" => pair(value).map(|v| b.flow_start_window_s = v),
            "tx_power_w" => scalar(value).map(|v| b.tx_power_w = v),
            "rx_power_w" => scalar(value).map(|v| b.rx_power_w = v),
            "initial_energy_j" => scalar(value).map(|v| b.initial_energy_j = v),
            "queue_capacity" => scalar(value).map(|v| b.queue_capacity = v),
            "broadcast_jitter_s" => scalar(value).map(|v| b.broadcast_jitter_s = v),
            "drain_s" => scalar(value).map(|v| b.drain_s = v),
            "pause_times" | "pause_times_s" => list(value).map(|v| plan.pause_times_s = v),
            "wait_times" | "wait_times_s" => list(value).map(|v| plan.wait_times_s = v),
            "protocols" => list(value).map(|v| plan.protocols = v),
            "seeds" => list(value).map(|v| plan.seeds = v),
            "seed0" => scalar(value).map(|v| seed0 = Some(v)),
            "seed_count" => scalar(value).map(|v| seed_count = Some(v)),
            _ => Err(format!("unknown key {key:?}")),
        };
        res.map_err(err)?;
    }

    if seed0.is_some() || seed_count.is_some() {
        let first = seed0.unwrap_or(1);
        let n = seed_count.unwrap_or(plan.seeds.len() as u64);
        plan.seeds = (first..first + n).collect();
    }
    plan.validate()?;
    Ok(plan)
}

pub fn parse_config_file(path: &Path) -> Result<ExperimentPlan, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}
