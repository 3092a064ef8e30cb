use std::collections::BTreeMap;

use meadsr::protocol::{DropReason, Note};
use meadsr::sim::trace::{PacketTag, TraceRecord};
use meadsr::sim::traffic::FlowSpec;
use meadsr::{run, EventTrace, NodeId, Protocol, SimConfig};

fn static_line(protocol: Protocol) -> SimConfig {
    SimConfig {
        protocol,
        node_count: 3,
        area_m: (500.0, 10.0),
        pause_time_s: 1e9,
        sim_duration_s: 20.0,
        initial_positions: Some(vec![(0.0, 5.0), (200.0, 5.0), (400.0, 5.0)]),
        flows: Some(vec![FlowSpec { flow_id: 0, src: NodeId(0), dest: NodeId(2), start_s: 1.0 }]),
        ..SimConfig::default()
    }
}

fn count(trace: &EventTrace, pred: impl Fn(&TraceRecord) -> bool) -> usize {
    trace.iter().filter(|r| pred(r)).count()
}

#[test]
fn two_hop_line_delivers_everything_through_the_relay() {
    for protocol in [Protocol::MeaDsr, Protocol::Dsr] {
        let trace = run(&static_line(protocol)).unwrap();
        let generated = count(&trace, |r| matches!(r, TraceRecord::Generate { .. }));
        let delivered: Vec<u32> = trace
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Deliver { node, hops, .. } => {
                    assert_eq!(*node, NodeId(2));
                    Some(*hops)
                }
                _ => None,
            })
            .collect();
        assert_eq!(generated, 77, "{protocol}");
        assert_eq!(delivered.len(), generated, "{protocol}");
        assert!(delivered.iter().all(|h| *h == 2));
        assert_eq!(count(&trace, |r| matches!(r, TraceRecord::LinkFailure { .. })), 0);
    }
}

#[test]
fn mea_dsr_destination_selects_once_per_flood() {
    let trace = run(&static_line(Protocol::MeaDsr)).unwrap();
    let selections: Vec<&Note> = trace
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Note { note: n @ Note::RouteSelection { .. }, .. } => Some(n),
            _ => None,
        })
        .collect();
    assert_eq!(selections.len(), 1);
    let Note::RouteSelection { candidates, alternate, .. } = selections[0] else { unreachable!() };
    assert_eq!(*candidates, 1);
    assert!(alternate.is_none());
}

#[test]
fn unreachable_destination_exhausts_discovery() {
    let mut cfg = static_line(Protocol::MeaDsr);
    cfg.initial_positions = Some(vec![(0.0, 5.0), (100.0, 5.0), (499.0, 5.0)]);
    let trace = run(&cfg).unwrap();
    assert_eq!(count(&trace, |r| matches!(r, TraceRecord::Deliver { .. })), 0);
    // One original flood and three retries per round of buffered data.
    let originations = count(&trace, |r| matches!(r, TraceRecord::RreqOriginate { .. }));
    assert!(originations >= 4, "{originations}");
    assert!(count(&trace, |r| matches!(r, TraceRecord::Drop { reason: DropReason::DiscoveryFailed, .. })) > 0);
}

fn mobile(protocol: Protocol) -> SimConfig {
    SimConfig { protocol, sim_duration_s: 200.0, seed: 3, ..SimConfig::desk_scale() }
}

#[test]
fn mobility_breaks_links_and_triggers_route_errors() {
    for protocol in [Protocol::MeaDsr, Protocol::Dsr] {
        let trace = run(&mobile(protocol)).unwrap();
        assert!(count(&trace, |r| matches!(r, TraceRecord::LinkFailure { .. })) > 0, "{protocol}");
        assert!(
            count(&trace, |r| matches!(r, TraceRecord::Tx { tag: PacketTag::Rerr { .. }, .. })) > 0,
            "{protocol}"
        );
    }
}

#[test]
fn mea_dsr_switches_to_alternate_routes() {
    let trace = run(&mobile(Protocol::MeaDsr)).unwrap();
    assert!(count(&trace, |r| matches!(r, TraceRecord::Note { note: Note::AlternatePromoted { .. }, .. })) > 0);
    assert_eq!(count(&trace, |r| matches!(r, TraceRecord::Note { note: Note::Salvaged { .. }, .. })), 0);
}

#[test]
fn dsr_salvages_each_packet_at_most_once() {
    let trace = run(&mobile(Protocol::Dsr)).unwrap();
    let mut salvages: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for r in trace.iter() {
        if let TraceRecord::Note { note: Note::Salvaged { flow_id, seq, .. }, .. } = r {
            *salvages.entry((*flow_id, *seq)).or_default() += 1;
        }
    }
    assert!(!salvages.is_empty());
    assert!(salvages.values().all(|n| *n == 1));
}

#[test]
fn every_packet_is_delivered_once_at_its_destination() {
    for protocol in [Protocol::MeaDsr, Protocol::Dsr] {
        let trace = run(&mobile(protocol)).unwrap();
        let mut dest_of = BTreeMap::new();
        for r in trace.iter() {
            if let TraceRecord::Flow { flow, dest, .. } = r {
                dest_of.insert(*flow, *dest);
            }
        }
        let mut seen = BTreeMap::new();
        for r in trace.iter() {
            if let TraceRecord::Deliver { node, flow, seq, t, created, .. } = r {
                assert_eq!(dest_of[flow], *node);
                assert!(t > created);
                *seen.entry((*flow, *seq)).or_insert(0) += 1;
            }
        }
        assert!(seen.values().all(|n| *n == 1), "{protocol}");
    }
}

#[test]
fn depleted_nodes_fall_silent() {
    let cfg = SimConfig { initial_energy_j: 1.0, ..mobile(Protocol::MeaDsr) };
    let trace = run(&cfg).unwrap();
    let finals = trace.node_energy();
    assert!(finals.iter().all(|(_, rem)| *rem >= 0.0));
    let depleted: Vec<NodeId> = finals
        .iter()
        .enumerate()
        .filter(|(_, (_, rem))| *rem == 0.0)
        .map(|(i, _)| NodeId(i as u32))
        .collect();
    assert!(!depleted.is_empty());

    // After a node's last debit empties it, it neither sends nor receives.
    let mut left: BTreeMap<NodeId, f64> = depleted.iter().map(|n| (*n, cfg.initial_energy_j)).collect();
    for r in trace.iter() {
        let (node, energy) = match r {
            TraceRecord::Tx { node, energy, .. } | TraceRecord::Rx { node, energy, .. } => (*node, *energy),
            _ => continue,
        };
        if let Some(e) = left.get_mut(&node) {
            assert!(*e > 0.0, "{node} active after depletion");
            *e -= energy;
        }
    }
}

#[test]
fn queue_overflow_is_traced_under_load() {
    let cfg = SimConfig { cbr_rate_pps: 1000.0, sim_duration_s: 5.0, queue_capacity: 5, ..static_line(Protocol::Dsr) };
    let trace = run(&cfg).unwrap();
    assert!(count(&trace, |r| matches!(r, TraceRecord::Drop { reason: DropReason::QueueOverflow, .. })) > 0);
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = SimConfig { node_count: 0, ..SimConfig::default() };
    assert!(matches!(run(&cfg), Err(meadsr::SimError::Config(_))));
}
