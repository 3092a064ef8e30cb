use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::meadsr::DEFAULT_WAIT_TIME_S;
use crate::sim::traffic::FlowSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "mea-dsr")]
    MeaDsr,
    #[serde(rename = "dsr")]
    Dsr,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::MeaDsr => "mea-dsr",
            Protocol::Dsr => "dsr",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mea-dsr" | "meadsr" | "mea_dsr" => Ok(Protocol::MeaDsr),
            "dsr" => Ok(Protocol::Dsr),
            other => Err(format!("unknown protocol {other:?} (expected mea-dsr or dsr)")),
        }
    }
}

/// One simulation scenario. Defaults reproduce the reference setup:
/// 50 nodes on 1000 m x 1000 m, 250 m range, 2 Mb/s, random waypoint at
/// 5-10 m/s, 10 CBR flows of 4 x 512 B packets per second for 600 s,
/// 1.4 W transmit and 1 W receive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub node_count: u32,
    pub area_m: (f64, f64),
    pub tx_range_m: f64,
    pub bitrate_bps: f64,
    pub speed_range_mps: (f64, f64),
    pub pause_time_s: f64,
    pub sim_duration_s: f64,
    pub connections: u32,
    pub cbr_rate_pps: f64,
    pub payload_bytes: u32,
    pub flow_start_window_s: (f64, f64),
    pub tx_power_w: f64,
    pub rx_power_w: f64,
    pub initial_energy_j: f64,
    /// Destination wait window; ignored by DSR.
    pub wait_time_s: f64,
    pub protocol: Protocol,
    pub seed: u64,
    /// Interface queue length per node, drop-tail.
    pub queue_capacity: usize,
    /// Upper bound of the uniform delay applied before rebroadcasting a
    /// forwarded route request.
    pub broadcast_jitter_s: f64,
    /// Time after the last packet origination during which in-flight
    /// traffic is still delivered.
    pub drain_s: f64,
    /// Fixed start positions, one per node. Random when absent.
    pub initial_positions: Option<Vec<(f64, f64)>>,
    /// Explicit flows. Drawn from the seed when absent.
    pub flows: Option<Vec<FlowSpec>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            node_count: 50,
            area_m: (1000.0, 1000.0),
            tx_range_m: 250.0,
            bitrate_bps: 2_000_000.0,
            speed_range_mps: (5.0, 10.0),
            pause_time_s: 0.0,
            sim_duration_s: 600.0,
            connections: 10,
            cbr_rate_pps: 4.0,
            payload_bytes: 512,
            flow_start_window_s: (0.0, 120.0),
            tx_power_w: 1.4,
            rx_power_w: 1.0,
            initial_energy_j: 1000.0,
            wait_time_s: DEFAULT_WAIT_TIME_S,
            protocol: Protocol::MeaDsr,
            seed: 1,
            queue_capacity: 50,
            broadcast_jitter_s: 0.010,
            drain_s: 1.0,
            initial_positions: None,
            flows: None,
        }
    }
}

impl SimConfig {
    /// Reduced scenario used for quick comparisons: 30 nodes on 700 m x 700 m
    /// with 5 flows.
    pub fn desk_scale() -> Self {
        SimConfig {
            node_count: 30,
            area_m: (700.0, 700.0),
            connections: 5,
            ..SimConfig::default()
        }
    }

    pub fn horizon_s(&self) -> f64 {
        self.sim_duration_s + self.drain_s
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        let positive = [
            ("area width", self.area_m.0),
            ("area height", self.area_m.1),
            ("tx_range_m", self.tx_range_m),
            ("bitrate_bps", self.bitrate_bps),
            ("sim_duration_s", self.sim_duration_s),
            ("cbr_rate_pps", self.cbr_rate_pps),
            ("tx_power_w", self.tx_power_w),
            ("rx_power_w", self.rx_power_w),
            ("initial_energy_j", self.initial_energy_j),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("pause_time_s", self.pause_time_s),
            ("wait_time_s", self.wait_time_s),
            ("broadcast_jitter_s", self.broadcast_jitter_s),
            ("drain_s", self.drain_s),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.node_count == 0 {
            return bad("node_count must be positive".into());
        }
        if self.payload_bytes == 0 {
            return bad("payload_bytes must be positive".into());
        }
        if self.queue_capacity == 0 {
            return bad("queue_capacity must be positive".into());
        }
        let (lo, hi) = self.speed_range_mps;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("speed range [{lo}, {hi}] is invalid"));
        }
        let (s0, s1) = self.flow_start_window_s;
        if !(s0 >= 0.0 && s1 >= s0 && s1.is_finite()) {
            return bad(format!("flow start window [{s0}, {s1}] is invalid"));
        }
        if self.flows.is_none() && self.connections > 0 && self.node_count < 2 {
            return bad("flows need at least two nodes".into());
        }
        if let Some(pos) = &self.initial_positions {
            if pos.len() != self.node_count as usize {
                return bad(format!("{} initial positions for {} nodes", pos.len(), self.node_count));
            }
            for &(x, y) in pos {
                if !(0.0..=self.area_m.0).contains(&x) || !(0.0..=self.area_m.1).contains(&y) {
                    return bad(format!("initial position ({x}, {y}) outside the area"));
                }
            }
        }
        if let Some(flows) = &self.flows {
            for f in flows {
                if f.src == f.dest || f.src.0 >= self.node_count || f.dest.0 >= self.node_count {
                    return bad(format!("flow {} has invalid endpoints", f.flow_id));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        SimConfig::desk_scale().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let cfg = SimConfig { tx_range_m: -1.0, ..SimConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig { speed_range_mps: (10.0, 5.0), ..SimConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig { initial_positions: Some(vec![(0.0, 0.0)]), ..SimConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in [Protocol::MeaDsr, Protocol::Dsr] {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("aodv".parse::<Protocol>().is_err());
    }
}
