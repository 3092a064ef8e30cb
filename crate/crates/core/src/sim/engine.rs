//! Event loop.
//!
//! Events are ordered strictly by `(time, insertion id)`. Each node
//! transmits one packet at a time from a drop-tail FIFO; a transmission
//! reaches every live node that is within range both when it starts and when
//! it ends. There are no collisions and no MAC retries: a unicast whose
//! receiver is out of range is reported to the sender's routing agent as a
//! link failure when the transmission ends.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dsr::DsrNode;
use crate::error::SimError;
use crate::meadsr::MeaDsrNode;
use crate::model::{Energy, NodeId, Packet};
use crate::protocol::{Action, DropReason, RoutingAgent, Timer};
use crate::sim::config::{Protocol, SimConfig};
use crate::sim::mobility::{rwp_trajectory, Point, Trajectory};
use crate::sim::radio::{airtime_s, energy_j, packet_bytes};
use crate::sim::rng::{stream, Domain};
use crate::sim::trace::{EventTrace, PacketTag, TraceRecord};
use crate::sim::traffic::{cbr_time, draw_flows, FlowSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    CbrTick { flow: usize, k: u64 },
    TimerExpiry { node: NodeId, timer: Timer },
    TxComplete { node: NodeId },
    PacketDelivery { from: NodeId, packet: Packet, receivers: Vec<NodeId> },
    WaypointArrival { node: NodeId },
    /// A jittered rebroadcast becomes ready to queue.
    BroadcastRelease { node: NodeId, packet: Packet },
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: f64,
    pub tie_break_id: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.tie_break_id.cmp(&self.tie_break_id))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_id: u64,
}

impl EventQueue {
    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        let id = self.next_id;
        self.next_id += 1;
        self.heap.push(Event { time, tie_break_id: id, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Outgoing {
    packet: Packet,
    to: Option<NodeId>,
}

#[derive(Debug, Clone)]
struct InFlight {
    out: Outgoing,
    in_range_at_start: Vec<NodeId>,
}

struct Engine<A: RoutingAgent> {
    config: SimConfig,
    now: f64,
    queue: EventQueue,
    agents: Vec<A>,
    initial: Vec<f64>,
    trajectories: Vec<Trajectory>,
    leg_cursor: Vec<usize>,
    txq: Vec<VecDeque<Outgoing>>,
    in_flight: Vec<Option<InFlight>>,
    jitter: Vec<ChaCha8Rng>,
    flows: Vec<FlowSpec>,
    trace: EventTrace,
}

/// Runs one scenario to completion and returns its trace.
pub fn run(config: &SimConfig) -> Result<EventTrace, SimError> {
    config.validate()?;
    let energy = Energy::joules(config.initial_energy_j);
    match config.protocol {
        Protocol::MeaDsr => {
            let agents = (0..config.node_count)
                .map(|i| MeaDsrNode::new(NodeId(i), energy, config.wait_time_s))
                .collect();
            Engine::new(config.clone(), agents).run()
        }
        Protocol::Dsr => {
            let agents = (0..config.node_count).map(|i| DsrNode::new(NodeId(i), energy)).collect();
            Engine::new(config.clone(), agents).run()
        }
    }
}

impl<A: RoutingAgent> Engine<A> {
    fn new(config: SimConfig, agents: Vec<A>) -> Self {
        let n = agents.len();
        let trajectories = (0..n as u32).map(|i| rwp_trajectory(NodeId(i), &config)).collect();
        let jitter = (0..n as u32).map(|i| stream(config.seed, Domain::Jitter, i)).collect();
        let initial = agents.iter().map(|a| a.energy().as_joules()).collect();
        let flows = draw_flows(&config);
        Engine {
            now: 0.0,
            queue: EventQueue::default(),
            agents,
            initial,
            trajectories,
            leg_cursor: vec![0; n],
            txq: vec![VecDeque::new(); n],
            in_flight: vec![None; n],
            jitter,
            flows,
            trace: EventTrace::default(),
            config,
        }
    }

    fn run(mut self) -> Result<EventTrace, SimError> {
        self.trace.push(TraceRecord::Header {
            protocol: self.config.protocol,
            seed: self.config.seed,
            node_count: self.config.node_count,
            sim_duration_s: self.config.sim_duration_s,
            pause_time_s: self.config.pause_time_s,
            wait_time_s: self.config.wait_time_s,
        });
        for (i, f) in self.flows.iter().enumerate() {
            self.trace.push(TraceRecord::Flow { flow: f.flow_id, src: f.src, dest: f.dest, start: f.start_s });
            if let Some(t) = cbr_time(f, 0, &self.config) {
                self.queue.schedule(t, EventKind::CbrTick { flow: i, k: 0 });
            }
        }
        for (i, tr) in self.trajectories.iter().enumerate() {
            self.queue.schedule(tr.legs()[0].t1, EventKind::WaypointArrival { node: NodeId(i as u32) });
        }

        let horizon = self.config.horizon_s();
        while let Some(ev) = self.queue.pop() {
            if ev.time > horizon {
                break;
            }
            if ev.time < self.now {
                return Err(self.invariant("event popped out of order"));
            }
            self.now = ev.time;
            self.dispatch(ev.kind)?;
        }

        for (i, a) in self.agents.iter().enumerate() {
            self.trace.push(TraceRecord::Final {
                node: NodeId(i as u32),
                initial: self.initial[i],
                remaining: a.energy().as_joules(),
            });
        }
        Ok(self.trace)
    }

    fn invariant(&self, message: impl Into<String>) -> SimError {
        SimError::Invariant { time: self.now, message: message.into() }
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::CbrTick { flow, k } => self.on_cbr_tick(flow, k),
            EventKind::TimerExpiry { node, timer } => {
                if self.agents[node.index()].energy().is_depleted() {
                    return Ok(());
                }
                let out = self.agents[node.index()].timer_expired(timer, self.now);
                self.apply(node, out)
            }
            EventKind::TxComplete { node } => self.on_tx_complete(node),
            EventKind::PacketDelivery { from, packet, receivers } => self.on_delivery(from, packet, receivers),
            EventKind::WaypointArrival { node } => {
                let i = node.index();
                let legs = self.trajectories[i].legs();
                if self.leg_cursor[i] + 1 < legs.len() {
                    self.leg_cursor[i] += 1;
                    let next = legs[self.leg_cursor[i]].t1;
                    self.queue.schedule(next, EventKind::WaypointArrival { node });
                }
                Ok(())
            }
            EventKind::BroadcastRelease { node, packet } => {
                self.enqueue(node, Outgoing { packet, to: None });
                Ok(())
            }
        }
    }

    fn position(&self, node: usize) -> Point {
        let leg = &self.trajectories[node].legs()[self.leg_cursor[node]];
        debug_assert!(self.now >= leg.t0 - 1e-9 && self.now <= leg.t1 + 1e-9);
        leg.position(self.now)
    }

    fn alive(&self, node: usize) -> bool {
        !self.agents[node].energy().is_depleted()
    }

    fn in_range_of(&self, node: usize) -> Vec<NodeId> {
        let here = self.position(node);
        (0..self.agents.len())
            .filter(|&j| j != node && self.alive(j))
            .filter(|&j| here.distance(self.position(j)) <= self.config.tx_range_m)
            .map(|j| NodeId(j as u32))
            .collect()
    }

    fn debit(&mut self, node: usize, cost: f64) -> f64 {
        let (left, drawn) = self.agents[node].energy().debit(cost);
        self.agents[node].set_energy(left);
        drawn
    }

    fn on_cbr_tick(&mut self, flow_idx: usize, k: u64) -> Result<(), SimError> {
        let flow = self.flows[flow_idx];
        let seq = k as u32;
        self.trace.push(TraceRecord::Generate { t: self.now, flow: flow.flow_id, seq, src: flow.src, dest: flow.dest });
        if let Some(t) = cbr_time(&flow, k + 1, &self.config) {
            self.queue.schedule(t, EventKind::CbrTick { flow: flow_idx, k: k + 1 });
        }
        if !self.alive(flow.src.index()) {
            self.trace.push(TraceRecord::Drop {
                t: self.now,
                node: flow.src,
                reason: DropReason::EnergyDepleted,
                tag: PacketTag::Data { src: flow.src, dest: flow.dest, flow: flow.flow_id, seq },
            });
            return Ok(());
        }
        let out = self.agents[flow.src.index()].originate_data(
            flow.dest,
            flow.flow_id,
            seq,
            self.config.payload_bytes,
            self.now,
        );
        self.apply(flow.src, out)
    }

    fn apply(&mut self, node: NodeId, out: crate::protocol::Outcome) -> Result<(), SimError> {
        let actions = out.map_err(|source| SimError::Protocol { time: self.now, source })?;
        let energy = self.agents[node.index()].energy().as_joules();
        for action in actions {
            match action {
                Action::Broadcast(packet) => {
                    let forwarded = match &packet {
                        Packet::Rreq(r) if r.hop_count == 0 => {
                            if r.src != node {
                                return Err(self.invariant(format!("{node} originated a request for {}", r.src)));
                            }
                            self.trace.push(TraceRecord::RreqOriginate {
                                t: self.now,
                                node,
                                dest: r.dest,
                                seq: r.seq,
                                energy,
                            });
                            false
                        }
                        Packet::Rreq(r) => {
                            let n = r.route_record.len();
                            if n < 2 || r.route_record[n - 1] != node {
                                return Err(self.invariant(format!("{node} forwarded a request without recording itself")));
                            }
                            self.trace.push(TraceRecord::RreqForward {
                                t: self.now,
                                node,
                                from: r.route_record[n - 2],
                                src: r.src,
                                seq: r.seq,
                                hops_in: r.hop_count - 1,
                                route_record: r.route_record.clone(),
                                min_bat_lev: r.min_bat_lev.as_joules(),
                                energy,
                            });
                            true
                        }
                        _ => false,
                    };
                    let jitter = self.config.broadcast_jitter_s;
                    if forwarded && jitter > 0.0 {
                        let delay = self.jitter[node.index()].random_range(0.0..jitter);
                        self.queue.schedule(self.now + delay, EventKind::BroadcastRelease { node, packet });
                    } else {
                        self.enqueue(node, Outgoing { packet, to: None });
                    }
                }
                Action::Unicast(packet, next) => {
                    if packet.expected_next_hop(node) != Some(next) {
                        return Err(self.invariant(format!(
                            "{node} unicast {:?} to {next}, which is not its successor on the packet's path",
                            packet.kind()
                        )));
                    }
                    self.enqueue(node, Outgoing { packet, to: Some(next) });
                }
                Action::StartTimer(timer, delay) => {
                    self.queue.schedule(self.now + delay, EventKind::TimerExpiry { node, timer });
                }
                Action::DeliverLocally(data) => {
                    if data.dest != node {
                        return Err(self.invariant(format!("{node} delivered a packet addressed to {}", data.dest)));
                    }
                    self.trace.push(TraceRecord::Deliver {
                        t: self.now,
                        node,
                        flow: data.flow_id,
                        seq: data.seq,
                        created: data.created_at,
                        hops: data.source_route.hop_count() as u32,
                    });
                }
                Action::Drop(packet, reason) => {
                    self.trace.push(TraceRecord::Drop { t: self.now, node, reason, tag: (&packet).into() });
                }
                Action::DropUnrouted(pending, reason) => {
                    self.trace.push(TraceRecord::Drop {
                        t: self.now,
                        node,
                        reason,
                        tag: PacketTag::unrouted(node, &pending),
                    });
                }
                Action::Record(note) => {
                    self.trace.push(TraceRecord::Note { t: self.now, node, note });
                }
            }
        }
        Ok(())
    }

    fn enqueue(&mut self, node: NodeId, out: Outgoing) {
        let i = node.index();
        if self.txq[i].len() >= self.config.queue_capacity {
            self.trace.push(TraceRecord::Drop {
                t: self.now,
                node,
                reason: DropReason::QueueOverflow,
                tag: (&out.packet).into(),
            });
            return;
        }
        self.txq[i].push_back(out);
        self.start_next(node);
    }

    fn start_next(&mut self, node: NodeId) {
        let i = node.index();
        if self.in_flight[i].is_some() {
            return;
        }
        if !self.alive(i) {
            for out in std::mem::take(&mut self.txq[i]) {
                self.trace.push(TraceRecord::Drop {
                    t: self.now,
                    node,
                    reason: DropReason::EnergyDepleted,
                    tag: (&out.packet).into(),
                });
            }
            return;
        }
        let Some(out) = self.txq[i].pop_front() else { return };
        let bytes = packet_bytes(&out.packet);
        let airtime = airtime_s(bytes, self.config.bitrate_bps);
        let drawn = self.debit(i, energy_j(self.config.tx_power_w, airtime));
        self.trace.push(TraceRecord::Tx {
            t: self.now,
            node,
            to: out.to,
            bytes,
            airtime,
            energy: drawn,
            tag: (&out.packet).into(),
        });
        let in_range_at_start = self.in_range_of(i);
        self.in_flight[i] = Some(InFlight { out, in_range_at_start });
        self.queue.schedule(self.now + airtime, EventKind::TxComplete { node });
    }

    fn on_tx_complete(&mut self, node: NodeId) -> Result<(), SimError> {
        let i = node.index();
        let Some(flight) = self.in_flight[i].take() else {
            return Err(self.invariant(format!("{node} completed a transmission it never started")));
        };
        let now_in_range = self.in_range_of(i);
        let receivers: Vec<NodeId> = flight
            .in_range_at_start
            .iter()
            .copied()
            .filter(|n| now_in_range.contains(n))
            .collect();
        match flight.out.to {
            None => {
                self.queue.schedule(
                    self.now,
                    EventKind::PacketDelivery { from: node, packet: flight.out.packet, receivers },
                );
            }
            Some(next) if receivers.contains(&next) => {
                self.queue.schedule(
                    self.now,
                    EventKind::PacketDelivery { from: node, packet: flight.out.packet, receivers: vec![next] },
                );
            }
            Some(next) => {
                // Every queued unicast for the same neighbour fails with it.
                let mut failed = vec![flight.out.packet];
                let (same, rest): (VecDeque<Outgoing>, VecDeque<Outgoing>) =
                    std::mem::take(&mut self.txq[i]).into_iter().partition(|o| o.to == Some(next));
                self.txq[i] = rest;
                failed.extend(same.into_iter().map(|o| o.packet));
                self.trace.push(TraceRecord::LinkFailure {
                    t: self.now,
                    node,
                    next_hop: next,
                    packets: failed.len() as u32,
                });
                if self.alive(i) {
                    let out = self.agents[i].link_failed(failed, next, self.now);
                    self.apply(node, out)?;
                }
            }
        }
        self.start_next(node);
        Ok(())
    }

    fn on_delivery(&mut self, from: NodeId, packet: Packet, receivers: Vec<NodeId>) -> Result<(), SimError> {
        let bytes = packet_bytes(&packet);
        let cost = energy_j(self.config.rx_power_w, airtime_s(bytes, self.config.bitrate_bps));
        let tag = PacketTag::from(&packet);
        for r in receivers {
            let j = r.index();
            if !self.alive(j) {
                continue;
            }
            let drawn = self.debit(j, cost);
            self.trace.push(TraceRecord::Rx { t: self.now, node: r, from, energy: drawn, tag });
            if let Packet::Rreq(rreq) = &packet {
                if rreq.dest == r {
                    self.trace.push(TraceRecord::RreqAtDest {
                        t: self.now,
                        node: r,
                        from,
                        src: rreq.src,
                        seq: rreq.seq,
                        route_record: rreq.route_record.clone(),
                        min_bat_lev: rreq.min_bat_lev.as_joules(),
                    });
                }
            }
            let out = self.agents[j].receive(packet.clone(), from, self.now);
            self.apply(r, out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queue_orders_by_time_then_insertion() {
        let mut q = EventQueue::default();
        q.schedule(2.0, EventKind::WaypointArrival { node: NodeId(0) });
        q.schedule(1.0, EventKind::WaypointArrival { node: NodeId(1) });
        q.schedule(1.0, EventKind::WaypointArrival { node: NodeId(2) });
        let order: Vec<(f64, u64)> = std::iter::from_fn(|| q.pop()).map(|e| (e.time, e.tie_break_id)).collect();
        assert_eq!(order, vec![(1.0, 1), (1.0, 2), (2.0, 0)]);
    }
}
