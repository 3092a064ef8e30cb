//! Performance metrics computed from a finished trace.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::sim::trace::{EventTrace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Delivered / generated. `None` when nothing was generated.
    pub pdf: Option<f64>,
    /// Mean end-to-end delay of delivered packets.
    pub ad_s: Option<f64>,
    /// Control transmissions per delivered packet.
    pub nro: Option<f64>,
    /// Total consumed energy per delivered packet.
    pub cep_j: Option<f64>,
    /// Population standard deviation of per-node consumed energy.
    pub sdcen_j: f64,
    pub generated: u64,
    pub delivered: u64,
    pub control_tx: u64,
    pub total_consumed_j: f64,
    /// Consumed energy per node, indexed by node id.
    pub per_node_energy: Vec<f64>,
}

fn ratio(num: f64, den: u64) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

/// Computes the report for a trace covering `node_count` nodes. A packet
/// delivered more than once counts once, with its first arrival.
pub fn compute_metrics(trace: &EventTrace, node_count: u32) -> MetricsReport {
    let mut generated = 0u64;
    let mut control_tx = 0u64;
    let mut delivered = BTreeSet::new();
    let mut delay_sum = 0.0;
    let mut per_node_energy = vec![0.0; node_count as usize];

    for r in trace.iter() {
        match r {
            TraceRecord::Generate { .. } => generated += 1,
            TraceRecord::Tx { tag, .. } if tag.kind().is_control() => control_tx += 1,
            TraceRecord::Deliver { t, flow, seq, created, .. } => {
                if delivered.insert((*flow, *seq)) {
                    delay_sum += t - created;
                }
            }
            TraceRecord::Final { node, initial, remaining } => {
                per_node_energy[node.index()] = initial - remaining;
            }
            _ => {}
        }
    }

    let delivered = delivered.len() as u64;
    let total_consumed_j: f64 = per_node_energy.iter().sum();
    let n = per_node_energy.len().max(1) as f64;
    let mean = total_consumed_j / n;
    let sdcen_j = (per_node_energy.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();

    MetricsReport {
        pdf: ratio(delivered as f64, generated),
        ad_s: ratio(delay_sum, delivered),
        nro: ratio(control_tx as f64, delivered),
        cep_j: ratio(total_consumed_j, delivered),
        sdcen_j,
        generated,
        delivered,
        control_tx,
        total_consumed_j,
        per_node_energy,
    }
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Runs where the metric was undefined and left out.
    pub excluded: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Summary {
        let mut defined = Vec::new();
        let mut excluded = 0;
        for v in values {
            match v {
                Some(x) => defined.push(x),
                None => excluded += 1,
            }
        }
        if defined.is_empty() {
            return Summary { mean: None, std: None, excluded };
        }
        let n = defined.len() as f64;
        let mean = defined.iter().sum::<f64>() / n;
        let std = if defined.len() > 1 {
            (defined.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary { mean: Some(mean), std: Some(std), excluded }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub pdf: Summary,
    pub ad_s: Summary,
    pub nro: Summary,
    pub cep_j: Summary,
    pub sdcen_j: Summary,
    pub generated: Summary,
    pub delivered: Summary,
    pub control_tx: Summary,
}

/// Cross-seed summary. Panics on an empty slice.
pub fn aggregate(reports: &[MetricsReport]) -> Aggregate {
    assert!(!reports.is_empty(), "aggregate needs at least one report");
    let s = |f: fn(&MetricsReport) -> Option<f64>| Summary::of(reports.iter().map(f));
    Aggregate {
        runs: reports.len(),
        pdf: s(|r| r.pdf),
        ad_s: s(|r| r.ad_s),
        nro: s(|r| r.nro),
        cep_j: s(|r| r.cep_j),
        sdcen_j: s(|r| Some(r.sdcen_j)),
        generated: s(|r| Some(r.generated as f64)),
        delivered: s(|r| Some(r.delivered as f64)),
        control_tx: s(|r| Some(r.control_tx as f64)),
    }
}
