//! Fixed-radius radio: packet sizes, airtime and energy cost.

use crate::model::Packet;

pub const HEADER_BYTES: u32 = 24;
pub const BYTES_PER_ROUTE_NODE: u32 = 4;

/// On-air size of a packet. Control packets carry 4 bytes per recorded
/// node; data packets additionally carry their payload.
pub fn packet_bytes(packet: &Packet) -> u32 {
    let recorded = match packet {
        Packet::Rreq(p) => p.route_record.len(),
        Packet::Rrep(p) => p.route.nodes().len(),
        Packet::Rerr(p) => p.return_path.len(),
        Packet::Data(p) => p.source_route.nodes().len(),
    } as u32;
    let payload = match packet {
        Packet::Data(p) => p.payload_bytes,
        _ => 0,
    };
    HEADER_BYTES + BYTES_PER_ROUTE_NODE * recorded + payload
}

pub fn airtime_s(bytes: u32, bitrate_bps: f64) -> f64 {
    f64::from(bytes) * 8.0 / bitrate_bps
}

pub fn energy_j(power_w: f64, airtime_s: f64) -> f64 {
    power_w * airtime_s
}
