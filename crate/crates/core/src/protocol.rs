//! Interface between per-node routing logic and the simulation engine.
//!
//! Agents are plain values. Each handler takes the current time and an
//! input and returns the actions the engine must carry out; the agent never
//! touches the radio or the clock itself.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::model::{DataPacket, Energy, NodeId, Packet, RerrPacket, Route, RreqPacket};

/// RREQ floods stop after this many hops.
pub const RREQ_TTL: u32 = 16;
/// Time a source waits for any reply before re-flooding.
pub const DISCOVERY_TIMEOUT_S: f64 = 0.5;
/// Re-floods after the first attempt before buffered packets are dropped.
pub const DISCOVERY_MAX_RETRIES: u32 = 3;
/// Send-buffer capacity per source node, drop-tail.
pub const PENDING_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "timer", rename_all = "snake_case")]
pub enum Timer {
    /// Destination-side route selection for flood `(src, seq)`.
    WaitTime { src: NodeId, seq: u32 },
    /// Source-side discovery attempt `seq` toward `dest`.
    Discovery { dest: NodeId, seq: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    DuplicateRequest,
    Loop,
    TtlExceeded,
    LateCopy,
    BufferOverflow,
    QueueOverflow,
    DiscoveryFailed,
    LinkBroken,
    NoRoute,
    Malformed,
    EnergyDepleted,
    Stale,
}

/// Trace-only notes an agent may attach to its actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum Note {
    RouteSelection {
        src: NodeId,
        seq: u32,
        candidates: usize,
        primary: Route,
        alternate: Option<Route>,
    },
    AlternatePromoted { dest: NodeId, route: Route },
    Salvaged { flow_id: u32, seq: u32, new_route: Route },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Broadcast(Packet),
    Unicast(Packet, NodeId),
    StartTimer(Timer, f64),
    DeliverLocally(DataPacket),
    Drop(Packet, DropReason),
    /// Application data lost before any route was attached to it.
    DropUnrouted(PendingData, DropReason),
    Record(Note),
}

impl Action {
    pub fn is_broadcast_rreq(&self) -> bool {
        matches!(self, Action::Broadcast(Packet::Rreq(_)))
    }
}

pub type Outcome = Result<Vec<Action>, ProtocolError>;

/// A routing protocol instance running on one node.
pub trait RoutingAgent: Clone {
    fn id(&self) -> NodeId;
    fn energy(&self) -> Energy;
    fn set_energy(&mut self, energy: Energy);

    /// A new data packet from the local application.
    fn originate_data(
        &mut self,
        dest: NodeId,
        flow_id: u32,
        seq: u32,
        payload_bytes: u32,
        now: f64,
    ) -> Outcome;

    /// A packet arriving over the air from neighbour `from`.
    fn receive(&mut self, packet: Packet, from: NodeId, now: f64) -> Outcome;

    fn timer_expired(&mut self, timer: Timer, now: f64) -> Outcome;

    /// Unicast transmission to `next_hop` failed. `packets` holds every
    /// unicast packet that was waiting for the same neighbour, in queue order.
    fn link_failed(&mut self, packets: Vec<Packet>, next_hop: NodeId, now: f64) -> Outcome;
}

/// Next hop for data flowing from `node` along `route`.
pub(crate) fn data_next_hop(route: &Route, node: NodeId) -> Option<NodeId> {
    route.next_after(node)
}

/// Application data waiting in the send buffer for a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingData {
    pub dest: NodeId,
    pub flow_id: u32,
    pub seq: u32,
    pub payload_bytes: u32,
    pub created_at: f64,
}

impl PendingData {
    pub fn with_route(self, src: NodeId, route: Route) -> DataPacket {
        DataPacket {
            src,
            dest: self.dest,
            flow_id: self.flow_id,
            seq: self.seq,
            source_route: route,
            payload_bytes: self.payload_bytes,
            created_at: self.created_at,
            salvaged: false,
        }
    }
}

impl From<DataPacket> for PendingData {
    fn from(d: DataPacket) -> Self {
        PendingData {
            dest: d.dest,
            flow_id: d.flow_id,
            seq: d.seq,
            payload_bytes: d.payload_bytes,
            created_at: d.created_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Discovery {
    pub seq: u32,
    pub retries: u32,
}

/// Source-role bookkeeping common to both protocols: send buffer, one
/// in-flight discovery per destination, and the set of destinations this
/// node has sessions with.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceState {
    pub next_seq: u32,
    pub pending: VecDeque<PendingData>,
    pub discoveries: BTreeMap<NodeId, Discovery>,
    pub active: BTreeSet<NodeId>,
}

impl SourceState {
    /// Appends to the send buffer; returns the drop action on overflow.
    pub fn buffer(&mut self, data: PendingData) -> Option<Action> {
        if self.pending.len() >= PENDING_CAPACITY {
            return Some(Action::DropUnrouted(data, DropReason::BufferOverflow));
        }
        self.pending.push_back(data);
        None
    }

    pub fn in_flight(&self, dest: NodeId) -> bool {
        self.discoveries.contains_key(&dest)
    }

    /// Floods a fresh RREQ unless one toward `dest` is already out.
    pub fn begin_discovery(&mut self, me: NodeId, dest: NodeId, energy: Energy) -> Vec<Action> {
        if self.in_flight(dest) {
            return Vec::new();
        }
        self.flood(me, dest, energy, 0)
    }

    fn flood(&mut self, me: NodeId, dest: NodeId, energy: Energy, retries: u32) -> Vec<Action> {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.discoveries.insert(dest, Discovery { seq, retries });
        vec![
            Action::Broadcast(Packet::Rreq(RreqPacket::originate(me, dest, seq, energy))),
            Action::StartTimer(Timer::Discovery { dest, seq }, DISCOVERY_TIMEOUT_S),
        ]
    }

    pub fn route_found(&mut self, dest: NodeId) {
        self.discoveries.remove(&dest);
    }

    pub fn take_pending(&mut self, dest: NodeId) -> Vec<PendingData> {
        let (hit, keep): (VecDeque<_>, VecDeque<_>) =
            self.pending.drain(..).partition(|p| p.dest == dest);
        self.pending = keep;
        hit.into()
    }

    pub fn has_pending(&self, dest: NodeId) -> bool {
        self.pending.iter().any(|p| p.dest == dest)
    }

    /// Handles a discovery timer. `has_route` reports whether the cache
    /// already holds a usable route (a stale timer is then ignored).
    pub fn discovery_timeout(
        &mut self,
        me: NodeId,
        dest: NodeId,
        seq: u32,
        energy: Energy,
        has_route: bool,
    ) -> Vec<Action> {
        let Some(current) = self.discoveries.get(&dest).copied() else {
            return Vec::new();
        };
        if current.seq != seq || has_route {
            return Vec::new();
        }
        if current.retries < DISCOVERY_MAX_RETRIES {
            return self.flood(me, dest, energy, current.retries + 1);
        }
        self.discoveries.remove(&dest);
        self.take_pending(dest)
            .into_iter()
            .map(|p| Action::DropUnrouted(p, DropReason::DiscoveryFailed))
            .collect()
    }
}

/// Builds the upstream RERR for a broken link `(reporter, next_hop)` on a
/// data packet's source route. `None` when the reporter is the source.
pub(crate) fn upstream_rerr(
    reporter: NodeId,
    next_hop: NodeId,
    route: &Route,
) -> Option<RerrPacket> {
    let pos = route.position(reporter)?;
    if pos == 0 {
        return None;
    }
    let return_path = route.nodes()[..=pos].iter().rev().copied().collect();
    Some(RerrPacket {
        reporter,
        broken_from: reporter,
        broken_to: next_hop,
        return_path,
    })
}
