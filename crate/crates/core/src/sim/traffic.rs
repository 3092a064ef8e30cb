//! Constant-bit-rate flows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::NodeId;
use crate::sim::config::SimConfig;
use crate::sim::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub flow_id: u32,
    pub src: NodeId,
    pub dest: NodeId,
    pub start_s: f64,
}

/// Flows for a scenario: the explicit list when given, otherwise
/// `connections` flows with distinct endpoints and uniform start times.
pub fn draw_flows(config: &SimConfig) -> Vec<FlowSpec> {
    if let Some(flows) = &config.flows {
        return flows.clone();
    }
    (0..config.connections)
        .map(|flow_id| {
            let mut rng = stream(config.seed, Domain::Flow, flow_id);
            let src = rng.random_range(0..config.node_count);
            let mut dest = rng.random_range(0..config.node_count - 1);
            if dest >= src {
                dest += 1;
            }
            let (lo, hi) = config.flow_start_window_s;
            let start_s = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            FlowSpec { flow_id, src: NodeId(src), dest: NodeId(dest), start_s }
        })
        .collect()
}

/// Origination time of packet `k`, or `None` once past the end of the run.
pub fn cbr_time(flow: &FlowSpec, k: u64, config: &SimConfig) -> Option<f64> {
    let t = flow.start_s + k as f64 / config.cbr_rate_pps;
    (t <= config.sim_duration_s).then_some(t)
}

pub fn cbr_schedule<'a>(flow: &'a FlowSpec, config: &'a SimConfig) -> impl Iterator<Item = f64> + 'a {
    (0u64..).map_while(move |k| cbr_time(flow, k, config))
}
