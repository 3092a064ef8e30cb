//! Domain types shared by both routing protocols, plus the pure route
//! arithmetic used for selection: hop length, energy-per-hop score and the
//! disjunction ratio between two routes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Node identifier, unique within a scenario (`id < node_count`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Residual or consumed energy in joules. Never negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Energy(f64);

impl Energy {
    pub const ZERO: Energy = Energy(0.0);

    /// Panics on a negative or NaN value.
    pub fn joules(j: f64) -> Self {
        assert!(j >= 0.0, "energy must be non-negative, got {j}");
        Energy(j)
    }

    pub fn as_joules(self) -> f64 {
        self.0
    }

    pub fn min(self, other: Energy) -> Energy {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    /// Subtracts `cost`, clamping at zero. Returns the new level and the
    /// amount actually drawn.
    pub fn debit(self, cost: f64) -> (Energy, f64) {
        let drawn = cost.min(self.0).max(0.0);
        (Energy(self.0 - drawn), drawn)
    }

    pub fn is_depleted(self) -> bool {
        self.0 <= 0.0
    }
}

/// Loop-free node sequence from a source to a destination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<NodeId>", into = "Vec<NodeId>")]
pub struct Route(Vec<NodeId>);

impl Route {
    pub fn new(nodes: Vec<NodeId>) -> Result<Self, ModelError> {
        if nodes.len() < 2 {
            return Err(ModelError::RouteTooShort(nodes.len()));
        }
        let mut seen = BTreeSet::new();
        for &n in &nodes {
            if !seen.insert(n) {
                return Err(ModelError::RouteLoop(n));
            }
        }
        Ok(Route(nodes))
    }

    pub fn from_ids(ids: &[u32]) -> Result<Self, ModelError> {
        Route::new(ids.iter().copied().map(NodeId).collect())
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn source(&self) -> NodeId {
        self.0[0]
    }

    pub fn destination(&self) -> NodeId {
        self.0[self.0.len() - 1]
    }

    /// Relay nodes, endpoints excluded.
    pub fn intermediates(&self) -> &[NodeId] {
        &self.0[1..self.0.len() - 1]
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.0.iter().position(|&n| n == node)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.0.contains(&node)
    }

    /// Node after `node` in the source-to-destination direction.
    pub fn next_after(&self, node: NodeId) -> Option<NodeId> {
        self.position(node).and_then(|i| self.0.get(i + 1).copied())
    }

    /// Node before `node` in the source-to-destination direction.
    pub fn prev_before(&self, node: NodeId) -> Option<NodeId> {
        self.position(node).and_then(|i| i.checked_sub(1).map(|j| self.0[j]))
    }

    /// True when consecutive nodes `a`,`b` appear in either orientation.
    pub fn uses_link(&self, a: NodeId, b: NodeId) -> bool {
        self.0
            .windows(2)
            .any(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
    }

    pub fn reversed(&self) -> Route {
        let mut v = self.0.clone();
        v.reverse();
        Route(v)
    }

    /// Sub-route between two positions (inclusive), reversed when `from > to`.
    pub fn segment(&self, from: usize, to: usize) -> Option<Route> {
        if from == to || from >= self.0.len() || to >= self.0.len() {
            return None;
        }
        let v = if from < to {
            self.0[from..=to].to_vec()
        } else {
            self.0[to..=from].iter().rev().copied().collect()
        };
        Some(Route(v))
    }

    pub fn hop_count(&self) -> usize {
        route_length(self)
    }
}

impl TryFrom<Vec<NodeId>> for Route {
    type Error = ModelError;
    fn try_from(v: Vec<NodeId>) -> Result<Self, Self::Error> {
        Route::new(v)
    }
}

impl From<Route> for Vec<NodeId> {
    fn from(r: Route) -> Self {
        r.0
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.0.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Hop count of a route (node count minus one).
pub fn route_length(route: &Route) -> usize {
    route.0.len() - 1
}

/// Minimum residual energy per hop, in J/hop. Higher is better.
///
/// # Panics
///
/// When `hops` is zero.
pub fn route_score(min_bat_lev: Energy, hops: usize) -> f64 {
    assert!(hops >= 1, "route_score needs at least one hop");
    min_bat_lev.as_joules() / hops as f64
}

/// Fraction of the candidate's relays that are not relays of `primary`.
///
/// A candidate without relays (a direct link) shares nothing and scores 1.0.
pub fn disjunction_ratio(primary: &Route, candidate: &Route) -> Result<f64, ModelError> {
    if primary.source() != candidate.source() || primary.destination() != candidate.destination() {
        return Err(ModelError::EndpointMismatch {
            primary: primary.to_string(),
            candidate: candidate.to_string(),
        });
    }
    let relays = candidate.intermediates();
    if relays.is_empty() {
        return Ok(1.0);
    }
    let shared = relays
        .iter()
        .filter(|n| primary.intermediates().contains(n))
        .count();
    Ok(1.0 - shared as f64 / relays.len() as f64)
}

/// Route request. `route_record` starts with the source; every forwarder
/// appends itself before rebroadcasting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RreqPacket {
    pub src: NodeId,
    pub dest: NodeId,
    pub seq: u32,
    pub min_bat_lev: Energy,
    pub route_record: Vec<NodeId>,
    pub hop_count: u32,
}

impl RreqPacket {
    pub fn originate(src: NodeId, dest: NodeId, seq: u32, own_energy: Energy) -> Self {
        RreqPacket {
            src,
            dest,
            seq,
            min_bat_lev: own_energy,
            route_record: vec![src],
            hop_count: 0,
        }
    }

    pub fn key(&self) -> (NodeId, u32) {
        (self.src, self.seq)
    }

    /// Route the copy describes once it reaches `self.dest`.
    pub fn route_to_dest(&self) -> Result<Route, ModelError> {
        let mut nodes = self.route_record.clone();
        nodes.push(self.dest);
        Route::new(nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrepPacket {
    pub src: NodeId,
    pub dest: NodeId,
    pub seq: u32,
    pub route: Route,
    pub is_primary: bool,
}

impl RrepPacket {
    /// Next hop while travelling back toward `src`.
    pub fn next_hop_from(&self, node: NodeId) -> Option<NodeId> {
        self.route.prev_before(node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerrPacket {
    pub reporter: NodeId,
    pub broken_from: NodeId,
    pub broken_to: NodeId,
    /// Reporter first, source last.
    pub return_path: Vec<NodeId>,
}

impl RerrPacket {
    pub fn next_hop_from(&self, node: NodeId) -> Option<NodeId> {
        let i = self.return_path.iter().position(|&n| n == node)?;
        self.return_path.get(i + 1).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPacket {
    pub src: NodeId,
    pub dest: NodeId,
    pub flow_id: u32,
    pub seq: u32,
    pub source_route: Route,
    pub payload_bytes: u32,
    pub created_at: f64,
    /// Set once a DSR relay has rerouted the packet.
    pub salvaged: bool,
}

impl DataPacket {
    pub fn next_hop_from(&self, node: NodeId) -> Option<NodeId> {
        self.source_route.next_after(node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketKind {
    Rreq,
    Rrep,
    Rerr,
    Data,
}

impl PacketKind {
    pub fn is_control(self) -> bool {
        !matches!(self, PacketKind::Data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Packet {
    Rreq(RreqPacket),
    Rrep(RrepPacket),
    Rerr(RerrPacket),
    Data(DataPacket),
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Rreq(_) => PacketKind::Rreq,
            Packet::Rrep(_) => PacketKind::Rrep,
            Packet::Rerr(_) => PacketKind::Rerr,
            Packet::Data(_) => PacketKind::Data,
        }
    }

    /// Where a unicast copy held by `node` must go next, if the packet
    /// carries a path at all.
    pub fn expected_next_hop(&self, node: NodeId) -> Option<NodeId> {
        match self {
            Packet::Rreq(_) => None,
            Packet::Rrep(r) => r.next_hop_from(node),
            Packet::Rerr(r) => r.next_hop_from(node),
            Packet::Data(d) => d.next_hop_from(node),
        }
    }
}

/// First-copy bookkeeping for a flood seen by a relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RreqTableEntry {
    pub key: (NodeId, u32),
    pub nb_hops: u32,
    pub last_node: NodeId,
    pub duplicates_forwarded: u32,
}

/// Candidate route collected by a destination during the wait window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutesTableEntry {
    pub src: NodeId,
    pub seq: u32,
    pub route: Route,
    pub min_bat_lev: Energy,
    pub arrival_time: f64,
}

impl RoutesTableEntry {
    pub fn score(&self) -> f64 {
        route_score(self.min_bat_lev, route_length(&self.route))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(ids: &[u32]) -> Route {
        Route::from_ids(ids).unwrap()
    }

    #[test]
    fn length_counts_edges() {
        assert_eq!(route_length(&r(&[1, 2])), 1);
        assert_eq!(route_length(&r(&[1, 2, 3, 4])), 3);
        assert_eq!(route_length(&r(&[5, 9, 2, 7, 0])), 4);
    }

    #[test]
    fn score_is_energy_per_hop() {
        assert_eq!(route_score(Energy::joules(50.0), 5), 10.0);
        assert_eq!(route_score(Energy::joules(0.0), 3), 0.0);
        let a = route_score(Energy::joules(60.0), 2);
        let b = route_score(Energy::joules(80.0), 4);
        assert_eq!((a, b), (30.0, 20.0));
        assert!(a > b);
    }

    #[test]
    #[should_panic]
    fn score_rejects_zero_hops() {
        route_score(Energy::joules(1.0), 0);
    }

    #[test]
    fn disjunction_examples() {
        assert_eq!(disjunction_ratio(&r(&[1, 2, 3, 4]), &r(&[1, 2, 3, 4])).unwrap(), 0.0);
        assert_eq!(disjunction_ratio(&r(&[1, 2, 3, 6]), &r(&[1, 4, 5, 6])).unwrap(), 1.0);
        assert_eq!(disjunction_ratio(&r(&[1, 2, 3, 6]), &r(&[1, 2, 5, 6])).unwrap(), 0.5);
        assert_eq!(disjunction_ratio(&r(&[1, 2, 6]), &r(&[1, 6])).unwrap(), 1.0);
    }

    #[test]
    fn disjunction_rejects_endpoint_mismatch() {
        assert!(matches!(
            disjunction_ratio(&r(&[1, 2, 3]), &r(&[1, 2, 4])),
            Err(ModelError::EndpointMismatch { .. })
        ));
    }

    #[test]
    fn looping_route_is_rejected() {
        assert!(matches!(Route::from_ids(&[1, 2, 1]), Err(ModelError::RouteLoop(NodeId(1)))));
        assert!(matches!(Route::from_ids(&[1]), Err(ModelError::RouteTooShort(1))));
        let json = "[1,2,1]";
        assert!(serde_json::from_str::<Route>(json).is_err());
    }

    #[test]
    fn link_use_is_orientation_free() {
        let route = r(&[1, 2, 3, 4]);
        assert!(route.uses_link(NodeId(2), NodeId(3)));
        assert!(route.uses_link(NodeId(3), NodeId(2)));
        assert!(!route.uses_link(NodeId(1), NodeId(3)));
    }

    #[test]
    fn segments() {
        let route = r(&[1, 2, 3, 4]);
        assert_eq!(route.segment(1, 3).unwrap(), r(&[2, 3, 4]));
        assert_eq!(route.segment(2, 0).unwrap(), r(&[3, 2, 1]));
        assert!(route.segment(2, 2).is_none());
    }

    #[test]
    fn energy_debit_clamps() {
        let (e, drawn) = Energy::joules(1.0).debit(3.0);
        assert_eq!(e, Energy::ZERO);
        assert_eq!(drawn, 1.0);
        assert!(e.is_depleted());
    }
}
