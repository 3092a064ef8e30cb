//! Simplified Dynamic Source Routing, used as the comparison baseline.
//!
//! Relays answer requests from their own caches, every node caches every
//! route it sees in forwarded traffic, duplicate requests are never
//! forwarded, and a relay that loses a link may salvage a data packet once
//! using an alternative cached route.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::ProtocolError;
use crate::model::{DataPacket, Energy, NodeId, Packet, RerrPacket, Route, RrepPacket, RreqPacket};
use crate::protocol::{
    data_next_hop, upstream_rerr, Action, DropReason, Note, Outcome, PendingData, RoutingAgent,
    SourceState, Timer, RREQ_TTL,
};

/// Routes kept per destination before the oldest is evicted.
pub const DSR_CACHE_PER_DEST: usize = 32;

/// Unbounded-in-spirit path cache: every known route from this node,
/// grouped by destination, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathCache {
    owner: Option<NodeId>,
    routes: BTreeMap<NodeId, Vec<Route>>,
}

impl PathCache {
    pub fn new(owner: NodeId) -> Self {
        PathCache { owner: Some(owner), routes: BTreeMap::new() }
    }

    pub fn add(&mut self, route: Route) {
        debug_assert_eq!(Some(route.source()), self.owner);
        let list = self.routes.entry(route.destination()).or_default();
        if list.contains(&route) {
            return;
        }
        list.push(route);
        if list.len() > DSR_CACHE_PER_DEST {
            list.remove(0);
        }
    }

    /// Caches every sub-route of `route` that starts at the owner, in both
    /// directions. Links are assumed bidirectional.
    pub fn learn(&mut self, route: &Route) {
        let Some(me) = self.owner else { return };
        let Some(pos) = route.position(me) else { return };
        for j in 0..route.nodes().len() {
            if let Some(seg) = route.segment(pos, j) {
                self.add(seg);
            }
        }
    }

    /// Cached routes to `dest`, shortest first, insertion order among equals.
    pub fn candidates(&self, dest: NodeId) -> Vec<&Route> {
        let mut v: Vec<&Route> = self.routes.get(&dest).map(|l| l.iter().collect()).unwrap_or_default();
        v.sort_by_key(|r| r.hop_count());
        v
    }

    pub fn best(&self, dest: NodeId) -> Option<&Route> {
        self.candidates(dest).into_iter().next()
    }

    pub fn purge_link(&mut self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        let mut emptied = Vec::new();
        for (&dest, list) in self.routes.iter_mut() {
            let before = list.len();
            list.retain(|r| !r.uses_link(a, b));
            if before > 0 && list.is_empty() {
                emptied.push(dest);
            }
        }
        self.routes.retain(|_, l| !l.is_empty());
        emptied
    }

    pub fn all(&self) -> impl Iterator<Item = &Route> {
        self.routes.values().flatten()
    }

    pub fn len(&self, dest: NodeId) -> usize {
        self.routes.get(&dest).map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsrNode {
    pub id: NodeId,
    pub energy: Energy,
    pub cache: PathCache,
    pub seen: BTreeSet<(NodeId, u32)>,
    pub source: SourceState,
}

impl DsrNode {
    pub fn new(id: NodeId, energy: Energy) -> Self {
        DsrNode {
            id,
            energy,
            cache: PathCache::new(id),
            seen: BTreeSet::new(),
            source: SourceState::default(),
        }
    }

    fn send_or_buffer(&mut self, data: PendingData, out: &mut Vec<Action>) {
        let dest = data.dest;
        if let Some(route) = self.cache.best(dest).cloned() {
            let next = route.nodes()[1];
            out.push(Action::Unicast(Packet::Data(data.with_route(self.id, route)), next));
            return;
        }
        out.extend(self.source.buffer(data));
        out.extend(self.source.begin_discovery(self.id, dest, self.energy));
    }

    /// Route request handling: destinations and relays holding a cached
    /// route reply to every copy; otherwise the first copy is forwarded and
    /// later ones dropped.
    pub fn handle_rreq(&mut self, rreq: RreqPacket, from: NodeId, _now: f64) -> Outcome {
        if rreq.route_record.contains(&self.id) {
            return Ok(vec![Action::Drop(Packet::Rreq(rreq), DropReason::Loop)]);
        }
        let mut seen_path = rreq.route_record.clone();
        seen_path.push(self.id);
        if let Ok(path) = Route::new(seen_path.clone()) {
            self.cache.learn(&path);
        }
        debug_assert_eq!(rreq.route_record.last(), Some(&from));

        if rreq.dest == self.id {
            let route = rreq.route_to_dest()?;
            let rrep = RrepPacket { src: rreq.src, dest: self.id, seq: rreq.seq, route, is_primary: true };
            let next = rrep.next_hop_from(self.id).expect("reply route ends here");
            return Ok(vec![Action::Unicast(Packet::Rrep(rrep), next)]);
        }
        if let Some(route) = self.cache_reply_route(&seen_path, rreq.dest) {
            let rrep = RrepPacket { src: rreq.src, dest: rreq.dest, seq: rreq.seq, route, is_primary: true };
            let next = rrep.next_hop_from(self.id).expect("replier follows the source");
            return Ok(vec![Action::Unicast(Packet::Rrep(rrep), next)]);
        }
        if !self.seen.insert(rreq.key()) {
            return Ok(vec![Action::Drop(Packet::Rreq(rreq), DropReason::DuplicateRequest)]);
        }
        if rreq.hop_count + 1 > RREQ_TTL {
            return Ok(vec![Action::Drop(Packet::Rreq(rreq), DropReason::TtlExceeded)]);
        }
        let mut fwd = rreq;
        fwd.min_bat_lev = if fwd.route_record.len() == 1 {
            self.energy
        } else {
            fwd.min_bat_lev.min(self.energy)
        };
        fwd.route_record.push(self.id);
        fwd.hop_count += 1;
        Ok(vec![Action::Broadcast(Packet::Rreq(fwd))])
    }

    /// `recorded` ends with this node; the first loop-free concatenation
    /// with a cached route wins.
    fn cache_reply_route(&self, recorded: &[NodeId], dest: NodeId) -> Option<Route> {
        self.cache.candidates(dest).into_iter().find_map(|cached| {
            let mut nodes = recorded.to_vec();
            nodes.extend_from_slice(&cached.nodes()[1..]);
            Route::new(nodes).ok()
        })
    }

    pub fn handle_rrep(&mut self, rrep: RrepPacket, _now: f64) -> Outcome {
        if !rrep.route.contains(self.id) || rrep.dest == self.id {
            return Ok(vec![Action::Drop(Packet::Rrep(rrep), DropReason::Malformed)]);
        }
        self.cache.learn(&rrep.route);
        if rrep.src != self.id {
            let next = rrep.next_hop_from(self.id).expect("non-source node has a predecessor");
            return Ok(vec![Action::Unicast(Packet::Rrep(rrep), next)]);
        }
        self.source.route_found(rrep.dest);
        let mut out = Vec::new();
        for data in self.source.take_pending(rrep.dest) {
            self.send_or_buffer(data, &mut out);
        }
        Ok(out)
    }

    fn handle_data(&mut self, data: DataPacket) -> Outcome {
        self.cache.learn(&data.source_route);
        if data.dest == self.id {
            return Ok(vec![Action::DeliverLocally(data)]);
        }
        match data_next_hop(&data.source_route, self.id) {
            Some(next) => Ok(vec![Action::Unicast(Packet::Data(data), next)]),
            None => Ok(vec![Action::Drop(Packet::Data(data), DropReason::Malformed)]),
        }
    }

    /// Reroutes a packet whose next link broke, at most once per packet.
    pub fn salvage(&self, mut data: DataPacket) -> Result<(DataPacket, NodeId), DataPacket> {
        if data.salvaged {
            return Err(data);
        }
        let Some(pos) = data.source_route.position(self.id) else {
            return Err(data);
        };
        let prefix = &data.source_route.nodes()[..pos];
        let rerouted = self.cache.candidates(data.dest).into_iter().find_map(|cached| {
            let mut nodes = prefix.to_vec();
            nodes.extend_from_slice(cached.nodes());
            Route::new(nodes).ok().map(|r| (r, cached.nodes()[1]))
        });
        match rerouted {
            Some((route, next)) => {
                data.source_route = route;
                data.salvaged = true;
                Ok((data, next))
            }
            None => Err(data),
        }
    }

    pub fn handle_link_failure(&mut self, packets: Vec<Packet>, next_hop: NodeId, _now: f64) -> Outcome {
        let emptied = self.cache.purge_link(self.id, next_hop);
        let mut out = Vec::new();
        let mut reported = BTreeSet::new();
        for packet in packets {
            match packet {
                Packet::Data(data) if data.src == self.id => {
                    self.send_or_buffer(data.into(), &mut out);
                }
                Packet::Data(data) => {
                    if reported.insert(data.src) {
                        if let Some(rerr) = upstream_rerr(self.id, next_hop, &data.source_route) {
                            let next = rerr.return_path[1];
                            out.push(Action::Unicast(Packet::Rerr(rerr), next));
                        }
                    }
                    match self.salvage(data) {
                        Ok((data, next)) => {
                            out.push(Action::Record(Note::Salvaged {
                                flow_id: data.flow_id,
                                seq: data.seq,
                                new_route: data.source_route.clone(),
                            }));
                            out.push(Action::Unicast(Packet::Data(data), next));
                        }
                        Err(data) => out.push(Action::Drop(Packet::Data(data), DropReason::LinkBroken)),
                    }
                }
                other => out.push(Action::Drop(other, DropReason::LinkBroken)),
            }
        }
        self.rediscover(&emptied, &mut out);
        Ok(out)
    }

    pub fn handle_rerr(&mut self, rerr: RerrPacket, _now: f64) -> Outcome {
        if !rerr.return_path.contains(&self.id) {
            return Ok(vec![Action::Drop(Packet::Rerr(rerr), DropReason::Malformed)]);
        }
        let emptied = self.cache.purge_link(rerr.broken_from, rerr.broken_to);
        let mut out = Vec::new();
        if let Some(next) = rerr.next_hop_from(self.id) {
            out.push(Action::Unicast(Packet::Rerr(rerr), next));
        }
        self.rediscover(&emptied, &mut out);
        Ok(out)
    }

    fn rediscover(&mut self, emptied: &[NodeId], out: &mut Vec<Action>) {
        for &dest in emptied {
            if self.source.active.contains(&dest) && self.cache.best(dest).is_none() {
                out.extend(self.source.begin_discovery(self.id, dest, self.energy));
            }
        }
    }
}

impl RoutingAgent for DsrNode {
    fn id(&self) -> NodeId {
        self.id
    }

    fn energy(&self) -> Energy {
        self.energy
    }

    fn set_energy(&mut self, energy: Energy) {
        self.energy = energy;
    }

    fn originate_data(&mut self, dest: NodeId, flow_id: u32, seq: u32, payload_bytes: u32, now: f64) -> Outcome {
        if dest == self.id {
            return Err(ProtocolError::SelfAddressed { node: self.id });
        }
        self.source.active.insert(dest);
        let mut out = Vec::new();
        self.send_or_buffer(PendingData { dest, flow_id, seq, payload_bytes, created_at: now }, &mut out);
        Ok(out)
    }

    fn receive(&mut self, packet: Packet, from: NodeId, now: f64) -> Outcome {
        match packet {
            Packet::Rreq(p) => self.handle_rreq(p, from, now),
            Packet::Rrep(p) => self.handle_rrep(p, now),
            Packet::Rerr(p) => self.handle_rerr(p, now),
            Packet::Data(p) => self.handle_data(p),
        }
    }

    fn timer_expired(&mut self, timer: Timer, _now: f64) -> Outcome {
        match timer {
            Timer::Discovery { dest, seq } => {
                let has_route = self.cache.best(dest).is_some();
                Ok(self.source.discovery_timeout(self.id, dest, seq, self.energy, has_route))
            }
            Timer::WaitTime { .. } => Ok(Vec::new()),
        }
    }

    fn link_failed(&mut self, packets: Vec<Packet>, next_hop: NodeId, now: f64) -> Outcome {
        self.handle_link_failure(packets, next_hop, now)
    }
}
