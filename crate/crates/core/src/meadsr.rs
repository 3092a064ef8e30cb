//! Multipath energy-aware source routing.
//!
//! Only destinations answer route requests. A destination collects every
//! copy of a flood that arrives within the wait window, then replies with
//! the copy maximising residual energy per hop and, when available, a second
//! route chosen for maximal node-disjointness from the first. Sources send on
//! one route until it breaks and keep the other in reserve.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{ModelError, ProtocolError};
use crate::model::{
    disjunction_ratio, DataPacket, Energy, NodeId, Packet, RerrPacket,
    RoutesTableEntry, Route, RrepPacket, RreqPacket, RreqTableEntry,
};
use crate::protocol::{
    data_next_hop, upstream_rerr, Action, DropReason, Note, Outcome, PendingData, RoutingAgent,
    SourceState, Timer, RREQ_TTL,
};

/// Default destination wait window, seconds.
pub const DEFAULT_WAIT_TIME_S: f64 = 0.030;

/// Per-destination primary and standby route.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CacheEntry {
    pub primary: Option<Route>,
    pub alternate: Option<Route>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RouteCache {
    entries: BTreeMap<NodeId, CacheEntry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PurgeOutcome {
    /// Destinations whose alternate took over the primary slot.
    pub promoted: Vec<(NodeId, Route)>,
    /// Destinations left with no route at all.
    pub lost: Vec<NodeId>,
}

impl RouteCache {
    pub fn get(&self, dest: NodeId) -> Option<&CacheEntry> {
        self.entries.get(&dest)
    }

    pub fn primary(&self, dest: NodeId) -> Option<&Route> {
        self.entries.get(&dest).and_then(|e| e.primary.as_ref())
    }

    pub fn alternate(&self, dest: NodeId) -> Option<&Route> {
        self.entries.get(&dest).and_then(|e| e.alternate.as_ref())
    }

    pub fn routes(&self) -> impl Iterator<Item = &Route> {
        self.entries
            .values()
            .flat_map(|e| e.primary.iter().chain(e.alternate.iter()))
    }

    /// Stores a route delivered by a reply.
    pub fn install(&mut self, route: Route, is_primary: bool) {
        let entry = self.entries.entry(route.destination()).or_default();
        if is_primary {
            if let Some(old) = entry.primary.replace(route.clone()) {
                if old != route && entry.alternate.is_none() {
                    entry.alternate = Some(old);
                }
            }
            if entry.alternate.as_ref() == Some(&route) {
                entry.alternate = None;
            }
        } else if entry.primary.is_none() {
            entry.primary = Some(route);
        } else if entry.primary.as_ref() != Some(&route) {
            entry.alternate = Some(route);
        }
    }

    /// Removes every route using link `a`-`b` in either direction and
    /// promotes surviving alternates.
    pub fn purge_link(&mut self, a: NodeId, b: NodeId) -> PurgeOutcome {
        let mut out = PurgeOutcome::default();
        for (&dest, entry) in self.entries.iter_mut() {
            let had_primary = entry.primary.is_some();
            if entry.primary.as_ref().is_some_and(|r| r.uses_link(a, b)) {
                entry.primary = None;
            }
            if entry.alternate.as_ref().is_some_and(|r| r.uses_link(a, b)) {
                entry.alternate = None;
            }
            if entry.primary.is_none() {
                if let Some(alt) = entry.alternate.take() {
                    out.promoted.push((dest, alt.clone()));
                    entry.primary = Some(alt);
                } else if had_primary {
                    out.lost.push(dest);
                }
            }
        }
        self.entries.retain(|_, e| e.primary.is_some());
        out
    }
}

/// Picks the primary and alternate routes from one flood's candidates.
///
/// Primary: highest `min_bat_lev / hops`, then earlier arrival, then the
/// lexicographically smaller node sequence. Alternate: highest disjunction
/// ratio against the primary, with the primary ordering as tie-break.
pub fn select_routes(entries: &[RoutesTableEntry]) -> Result<(Route, Option<Route>), ModelError> {
    let primary = entries
        .iter()
        .min_by(|a, b| primary_order(a, b))
        .ok_or(ModelError::NoCandidates)?;
    let mut best: Option<(&RoutesTableEntry, f64)> = None;
    for cand in entries.iter().filter(|e| !std::ptr::eq(*e, primary)) {
        let ratio = disjunction_ratio(&primary.route, &cand.route)?;
        let better = match best {
            None => true,
            Some((cur, cur_ratio)) => match ratio.total_cmp(&cur_ratio) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => primary_order(cand, cur) == Ordering::Less,
            },
        };
        if better {
            best = Some((cand, ratio));
        }
    }
    Ok((primary.route.clone(), best.map(|(e, _)| e.route.clone())))
}

/// `Less` means `a` is preferred.
fn primary_order(a: &RoutesTableEntry, b: &RoutesTableEntry) -> Ordering {
    b.score()
        .total_cmp(&a.score())
        .then(a.arrival_time.total_cmp(&b.arrival_time))
        .then_with(|| a.route.cmp(&b.route))
}

/// MEA-DSR state of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct MeaDsrNode {
    pub id: NodeId,
    pub energy: Energy,
    pub wait_time_s: f64,
    pub cache: RouteCache,
    pub rreq_table: BTreeMap<(NodeId, u32), RreqTableEntry>,
    pub routes_table: BTreeMap<(NodeId, u32), Vec<RoutesTableEntry>>,
    /// Floods this node already answered as destination.
    pub answered: BTreeSet<(NodeId, u32)>,
    pub source: SourceState,
}

impl MeaDsrNode {
    pub fn new(id: NodeId, energy: Energy, wait_time_s: f64) -> Self {
        MeaDsrNode {
            id,
            energy,
            wait_time_s,
            cache: RouteCache::default(),
            rreq_table: BTreeMap::new(),
            routes_table: BTreeMap::new(),
            answered: BTreeSet::new(),
            source: SourceState::default(),
        }
    }

    fn send_or_buffer(&mut self, data: PendingData, out: &mut Vec<Action>) {
        let dest = data.dest;
        if let Some(route) = self.cache.primary(dest).cloned() {
            let next = route.nodes()[1];
            out.push(Action::Unicast(Packet::Data(data.with_route(self.id, route)), next));
            return;
        }
        out.extend(self.source.buffer(data));
        out.extend(self.source.begin_discovery(self.id, dest, self.energy));
    }

    pub fn handle_rreq(&mut self, rreq: RreqPacket, from: NodeId, now: f64) -> Outcome {
        let key = rreq.key();
        if rreq.dest == self.id {
            if self.answered.contains(&key) {
                return Ok(vec![Action::Drop(Packet::Rreq(rreq), DropReason::LateCopy)]);
            }
            let route = rreq.route_to_dest()?;
            let entries = self.routes_table.entry(key).or_default();
            entries.push(RoutesTableEntry {
                src: rreq.src,
                seq: rreq.seq,
                route,
                min_bat_lev: rreq.min_bat_lev,
                arrival_time: now,
            });
            if entries.len() == 1 {
                return Ok(vec![Action::StartTimer(
                    Timer::WaitTime { src: rreq.src, seq: rreq.seq },
                    self.wait_time_s,
                )]);
            }
            return Ok(Vec::new());
        }
        if rreq.route_record.contains(&self.id) {
            return Ok(vec![Action::Drop(Packet::Rreq(rreq), DropReason::Loop)]);
        }
        match self.rreq_table.get_mut(&key) {
            None => {
                self.rreq_table.insert(
                    key,
                    RreqTableEntry {
                        key,
                        nb_hops: rreq.hop_count,
                        last_node: from,
                        duplicates_forwarded: 0,
                    },
                );
            }
            Some(entry) => {
                let qualifies = from != entry.last_node
                    && rreq.hop_count <= entry.nb_hops
                    && entry.duplicates_forwarded == 0;
                if !qualifies {
                    return Ok(vec![Action::Drop(Packet::Rreq(rreq), DropReason::DuplicateRequest)]);
                }
                entry.duplicates_forwarded += 1;
            }
        }
        if rreq.hop_count + 1 > RREQ_TTL {
            return Ok(vec![Action::Drop(Packet::Rreq(rreq), DropReason::TtlExceeded)]);
        }
        Ok(vec![Action::Broadcast(Packet::Rreq(self.annotate(rreq)))])
    }

    /// Folds own residual energy into `min_bat_lev` and appends self.
    fn annotate(&self, mut rreq: RreqPacket) -> RreqPacket {
        rreq.min_bat_lev = if rreq.route_record.len() == 1 {
            self.energy
        } else {
            rreq.min_bat_lev.min(self.energy)
        };
        rreq.route_record.push(self.id);
        rreq.hop_count += 1;
        rreq
    }

    pub fn on_wait_time_expiry(&mut self, src: NodeId, seq: u32, _now: f64) -> Outcome {
        let entries = self
            .routes_table
            .remove(&(src, seq))
            .filter(|e| !e.is_empty())
            .ok_or(ProtocolError::EmptyRoutesTable { node: self.id, src, seq })?;
        self.answered.insert((src, seq));
        let (primary, alternate) = select_routes(&entries)?;
        let mut out = vec![Action::Record(Note::RouteSelection {
            src,
            seq,
            candidates: entries.len(),
            primary: primary.clone(),
            alternate: alternate.clone(),
        })];
        for (route, is_primary) in std::iter::once((primary, true)).chain(alternate.map(|r| (r, false))) {
            let rrep = RrepPacket { src, dest: self.id, seq, route, is_primary };
            let next = rrep
                .next_hop_from(self.id)
                .expect("selected route ends at this node");
            out.push(Action::Unicast(Packet::Rrep(rrep), next));
        }
        Ok(out)
    }

    pub fn handle_rrep(&mut self, rrep: RrepPacket, _now: f64) -> Outcome {
        if !rrep.route.contains(self.id) || rrep.dest == self.id {
            return Ok(vec![Action::Drop(Packet::Rrep(rrep), DropReason::Malformed)]);
        }
        if rrep.src != self.id {
            let next = rrep.next_hop_from(self.id).expect("non-source node has a predecessor");
            return Ok(vec![Action::Unicast(Packet::Rrep(rrep), next)]);
        }
        let dest = rrep.dest;
        self.cache.install(rrep.route, rrep.is_primary);
        self.source.route_found(dest);
        let mut out = Vec::new();
        for data in self.source.take_pending(dest) {
            self.send_or_buffer(data, &mut out);
        }
        Ok(out)
    }

    pub fn handle_link_failure(&mut self, packets: Vec<Packet>, next_hop: NodeId, _now: f64) -> Outcome {
        let purge = self.cache.purge_link(self.id, next_hop);
        let mut out = promotion_notes(&purge);
        let mut reported: BTreeSet<NodeId> = BTreeSet::new();
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
                    out.push(Action::Drop(Packet::Data(data), DropReason::LinkBroken));
                }
                other => out.push(Action::Drop(other, DropReason::LinkBroken)),
            }
        }
        self.rediscover_lost(&purge.lost, &mut out);
        Ok(out)
    }

    pub fn handle_rerr(&mut self, rerr: RerrPacket, _now: f64) -> Outcome {
        if !rerr.return_path.contains(&self.id) {
            return Ok(vec![Action::Drop(Packet::Rerr(rerr), DropReason::Malformed)]);
        }
        let purge = self.cache.purge_link(rerr.broken_from, rerr.broken_to);
        let mut out = promotion_notes(&purge);
        if let Some(next) = rerr.next_hop_from(self.id) {
            out.push(Action::Unicast(Packet::Rerr(rerr), next));
        }
        self.rediscover_lost(&purge.lost, &mut out);
        Ok(out)
    }

    fn rediscover_lost(&mut self, lost: &[NodeId], out: &mut Vec<Action>) {
        for &dest in lost {
            if self.source.active.contains(&dest) && self.cache.primary(dest).is_none() {
                out.extend(self.source.begin_discovery(self.id, dest, self.energy));
            }
        }
    }

    fn handle_data(&mut self, data: DataPacket) -> Outcome {
        if data.dest == self.id {
            return Ok(vec![Action::DeliverLocally(data)]);
        }
        match data_next_hop(&data.source_route, self.id) {
            Some(next) => Ok(vec![Action::Unicast(Packet::Data(data), next)]),
            None => Ok(vec![Action::Drop(Packet::Data(data), DropReason::Malformed)]),
        }
    }
}

pub(crate) fn promotion_notes(purge: &PurgeOutcome) -> Vec<Action> {
    purge
        .promoted
        .iter()
        .map(|(dest, route)| Action::Record(Note::AlternatePromoted { dest: *dest, route: route.clone() }))
        .collect()
}

impl RoutingAgent for MeaDsrNode {
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
        let data = PendingData { dest, flow_id, seq, payload_bytes, created_at: now };
        self.send_or_buffer(data, &mut out);
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

    fn timer_expired(&mut self, timer: Timer, now: f64) -> Outcome {
        match timer {
            Timer::WaitTime { src, seq } => self.on_wait_time_expiry(src, seq, now),
            Timer::Discovery { dest, seq } => {
                let has_route = self.cache.primary(dest).is_some();
                Ok(self.source.discovery_timeout(self.id, dest, seq, self.energy, has_route))
            }
        }
    }

    fn link_failed(&mut self, packets: Vec<Packet>, next_hop: NodeId, now: f64) -> Outcome {
        self.handle_link_failure(packets, next_hop, now)
    }
}
