//! Append-only record of everything observable in a run.
//!
//! Exported as JSON lines, one record per line, tagged by the `ev` field.
//! The schema is described in `docs/trace-format.md`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{NodeId, Packet, PacketKind};
use crate::protocol::{DropReason, Note, PendingData};
use crate::sim::config::Protocol;

/// Compact identity of a packet, enough to follow it through the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PacketTag {
    Rreq { src: NodeId, seq: u32, hops: u32 },
    Rrep { src: NodeId, dest: NodeId, seq: u32, primary: bool },
    Rerr { reporter: NodeId, from: NodeId, to: NodeId },
    Data { src: NodeId, dest: NodeId, flow: u32, seq: u32 },
}

impl PacketTag {
    pub fn kind(&self) -> PacketKind {
        match self {
            PacketTag::Rreq { .. } => PacketKind::Rreq,
            PacketTag::Rrep { .. } => PacketKind::Rrep,
            PacketTag::Rerr { .. } => PacketKind::Rerr,
            PacketTag::Data { .. } => PacketKind::Data,
        }
    }

    pub fn unrouted(src: NodeId, p: &PendingData) -> Self {
        PacketTag::Data { src, dest: p.dest, flow: p.flow_id, seq: p.seq }
    }
}

impl From<&Packet> for PacketTag {
    fn from(p: &Packet) -> Self {
        match p {
            Packet::Rreq(r) => PacketTag::Rreq { src: r.src, seq: r.seq, hops: r.hop_count },
            Packet::Rrep(r) => PacketTag::Rrep { src: r.src, dest: r.dest, seq: r.seq, primary: r.is_primary },
            Packet::Rerr(r) => PacketTag::Rerr { reporter: r.reporter, from: r.broken_from, to: r.broken_to },
            Packet::Data(d) => PacketTag::Data { src: d.src, dest: d.dest, flow: d.flow_id, seq: d.seq },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        protocol: Protocol,
        seed: u64,
        node_count: u32,
        sim_duration_s: f64,
        pause_time_s: f64,
        wait_time_s: f64,
    },
    Flow { flow: u32, src: NodeId, dest: NodeId, start: f64 },
    /// A CBR source produced a data packet.
    Generate { t: f64, flow: u32, seq: u32, src: NodeId, dest: NodeId },
    RreqOriginate { t: f64, node: NodeId, dest: NodeId, seq: u32, energy: f64 },
    /// A relay decided to rebroadcast; `energy` is its residual energy at
    /// that instant and `route_record` the outgoing record.
    RreqForward {
        t: f64,
        node: NodeId,
        from: NodeId,
        src: NodeId,
        seq: u32,
        hops_in: u32,
        route_record: Vec<NodeId>,
        min_bat_lev: f64,
        energy: f64,
    },
    /// A request copy reached its destination.
    RreqAtDest {
        t: f64,
        node: NodeId,
        from: NodeId,
        src: NodeId,
        seq: u32,
        route_record: Vec<NodeId>,
        min_bat_lev: f64,
    },
    /// Transmission start; `energy` is the transmit debit.
    Tx {
        t: f64,
        node: NodeId,
        to: Option<NodeId>,
        bytes: u32,
        airtime: f64,
        energy: f64,
        tag: PacketTag,
    },
    /// Successful reception; `energy` is the receive debit.
    Rx { t: f64, node: NodeId, from: NodeId, energy: f64, tag: PacketTag },
    LinkFailure { t: f64, node: NodeId, next_hop: NodeId, packets: u32 },
    Deliver { t: f64, node: NodeId, flow: u32, seq: u32, created: f64, hops: u32 },
    Drop { t: f64, node: NodeId, reason: DropReason, tag: PacketTag },
    Note { t: f64, node: NodeId, #[serde(flatten)] note: Note },
    Final { node: NodeId, initial: f64, remaining: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventTrace {
    pub records: Vec<TraceRecord>,
}

impl EventTrace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(EventTrace { records })
    }

    /// SHA-256 of the JSON-lines export, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            h.update(serde_json::to_vec(r).expect("trace records serialize"));
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// `(initial, remaining)` energy per node, indexed by node id.
    pub fn node_energy(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(NodeId, f64, f64)> = self
            .records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Final { node, initial, remaining } => Some((*node, *initial, *remaining)),
                _ => None,
            })
            .collect();
        out.sort_by_key(|(n, _, _)| *n);
        out.into_iter().map(|(_, i, r)| (i, r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::DropReason;

    #[test]
    fn jsonl_round_trip() {
        let mut t = EventTrace::default();
        t.push(TraceRecord::Tx {
            t: 0.5,
            node: NodeId(1),
            to: None,
            bytes: 28,
            airtime: 1.12e-4,
            energy: 1.568e-4,
            tag: PacketTag::Rreq { src: NodeId(1), seq: 0, hops: 0 },
        });
        t.push(TraceRecord::Drop {
            t: 0.7,
            node: NodeId(2),
            reason: DropReason::QueueOverflow,
            tag: PacketTag::Data { src: NodeId(1), dest: NodeId(3), flow: 0, seq: 9 },
        });
        t.push(TraceRecord::Note {
            t: 1.0,
            node: NodeId(3),
            note: Note::AlternatePromoted { dest: NodeId(4), route: crate::model::Route::from_ids(&[3, 4]).unwrap() },
        });
        let text = String::from_utf8(t.to_jsonl()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("{\"ev\":\"tx\""));
        assert_eq!(EventTrace::read_jsonl(&text).unwrap(), t);
    }
}
