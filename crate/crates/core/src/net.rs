//! In-process message transport between the three servers and the clients,
//! with exact per-link byte accounting and a latency/bandwidth model for
//! WAN-style runtime estimates.
//!
//! Delivery is reliable and in-order per directed link. Inter-server frames
//! follow a fixed wire layout (phase tag byte, round u32 LE, sender id byte,
//! payload length u64 LE, payload). Alongside physical payload bytes the
//! transport tracks logical bits (61 per field element, 128 per seed), which
//! is the unit the protocol's communication formulas are stated in.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::field::{elements_from_bytes, elements_to_bytes, FieldElement};
use crate::prg::{Seed, ELEMENT_BITS, SEED_BITS};
use crate::rss::PartyId;

/// A message source or sink.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum EndpointId {
    /// One of the three servers.
    Server(u8),
    /// A client, identified by its index in the round.
    Client(u32),
}

impl EndpointId {
    /// Server endpoint for a party.
    pub fn server(p: PartyId) -> Self {
        EndpointId::Server(p.0)
    }

    /// Wire byte identifying the sender (servers 0-2; clients 0xff since
    /// client messages carry their identity in the bundle manifest).
    fn sender_byte(self) -> u8 {
        match self {
            EndpointId::Server(i) => i,
            EndpointId::Client(_) => 0xff,
        }
    }
}

/// Typed payload; the type determines both wire bytes and logical bits.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// Field elements, 8 wire bytes / 61 logical bits each.
    Elements(Vec<FieldElement>),
    /// PRG seeds, 16 wire bytes / 128 logical bits each.
    Seeds(Vec<Seed>),
    /// Vector indices, 8 wire bytes each; logically field-sized (61 bits).
    Indices(Vec<u64>),
    /// A 32-byte digest, 256 logical bits.
    Digest([u8; 32]),
}

impl Payload {
    /// Physical payload size on the wire.
    pub fn wire_bytes(&self) -> u64 {
        match self {
            Payload::Elements(v) => 8 * v.len() as u64,
            Payload::Seeds(v) => 16 * v.len() as u64,
            Payload::Indices(v) => 8 * v.len() as u64,
            Payload::Digest(_) => 32,
        }
    }

    /// Logical size in bits, the unit of the protocol cost formulas.
    pub fn logical_bits(&self) -> u64 {
        match self {
            Payload::Elements(v) => ELEMENT_BITS * v.len() as u64,
            Payload::Seeds(v) => SEED_BITS * v.len() as u64,
            Payload::Indices(v) => ELEMENT_BITS * v.len() as u64,
            Payload::Digest(_) => 256,
        }
    }

    /// Serializes to raw payload bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Payload::Elements(v) => elements_to_bytes(v),
            Payload::Seeds(v) => v.iter().flat_map(|s| s.0).collect(),
            Payload::Indices(v) => v.iter().flat_map(|i| i.to_le_bytes()).collect(),
            Payload::Digest(d) => d.to_vec(),
        }
    }

    /// Unwraps an element payload.
    pub fn into_elements(self) -> Vec<FieldElement> {
        match self {
            Payload::Elements(v) => v,
            other => panic!("expected element payload, got {other:?}"),
        }
    }

    /// Unwraps a digest payload.
    pub fn into_digest(self) -> [u8; 32] {
        match self {
            Payload::Digest(d) => d,
            other => panic!("expected digest payload, got {other:?}"),
        }
    }

    /// Unwraps a seed payload.
    pub fn into_seeds(self) -> Vec<Seed> {
        match self {
            Payload::Seeds(v) => v,
            other => panic!("expected seed payload, got {other:?}"),
        }
    }

    /// Unwraps an index payload.
    pub fn into_indices(self) -> Vec<u64> {
        match self {
            Payload::Indices(v) => v,
            other => panic!("expected index payload, got {other:?}"),
        }
    }
}

/// One queued message.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// Protocol phase tag.
    pub phase: u8,
    /// Round counter.
    pub round: u32,
    /// Originating endpoint.
    pub sender: EndpointId,
    /// Message body.
    pub payload: Payload,
}

impl Frame {
    /// Fixed header size: phase(1) + round(4) + sender(1) + length(8).
    pub const HEADER_BYTES: u64 = 14;

    /// Serializes to the wire layout.
    pub fn encode(&self) -> Vec<u8> {
        let body = self.payload.to_bytes();
        let mut out = Vec::with_capacity(Self::HEADER_BYTES as usize + body.len());
        out.push(self.phase);
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.sender.sender_byte());
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Parses an element-payload frame from the wire layout.
    pub fn decode_elements(bytes: &[u8]) -> Result<Frame, NetError> {
        if bytes.len() < Self::HEADER_BYTES as usize {
            return Err(NetError::Truncated);
        }
        let phase = bytes[0];
        let round = u32::from_le_bytes(bytes[1..5].try_into().unwrap());
        let sender_byte = bytes[5];
        let len = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
        let body = &bytes[14..];
        if body.len() != len {
            return Err(NetError::Truncated);
        }
        let payload = Payload::Elements(
            elements_from_bytes(body).map_err(|_| NetError::Malformed)?,
        );
        let sender = match sender_byte {
            0..=2 => EndpointId::Server(sender_byte),
            _ => EndpointId::Client(0),
        };
        Ok(Frame {
            phase,
            round,
            sender,
            payload,
        })
    }
}

/// Transport errors.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NetError {
    /// Receive on an empty link.
    #[error("no pending message from {0:?} to {1:?}")]
    Empty(EndpointId, EndpointId),
    /// Frame exceeds the 2^32-byte payload cap.
    #[error("oversized frame: {0} bytes")]
    Oversized(u64),
    /// Frame shorter than its declared length.
    #[error("truncated frame")]
    Truncated,
    /// Payload bytes failed validation.
    #[error("malformed payload")]
    Malformed,
}

/// Traffic counters for one directed link.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    /// Frames sent.
    pub messages: u64,
    /// Payload bytes (excluding the 14-byte frame header).
    pub payload_bytes: u64,
    /// Logical bits (field elements at 61, seeds at 128).
    pub logical_bits: u64,
}

/// Latency/bandwidth cost model for the wallclock estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NetModel {
    /// One-way link latency in milliseconds.
    pub latency_ms: f64,
    /// Link bandwidth in megabits per second.
    pub bandwidth_mbps: f64,
}

impl Default for NetModel {
    fn default() -> Self {
        NetModel {
            latency_ms: 40.0,
            bandwidth_mbps: 100.0,
        }
    }
}

/// Byte totals for one sequential protocol phase, tracked per link so the
/// critical path is the busiest link.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseRecord {
    /// Phase label (e.g. "shuffle/pass0").
    pub name: String,
    /// Wire bytes per directed link within this phase.
    pub per_link_bytes: BTreeMap<(EndpointId, EndpointId), u64>,
}

impl PhaseRecord {
    /// Bytes on the busiest link of the phase.
    pub fn max_link_bytes(&self) -> u64 {
        self.per_link_bytes.values().copied().max().unwrap_or(0)
    }
}

/// Estimates end-to-end wallclock across sequential phases: each phase costs
/// one latency plus its busiest link drained at the modeled bandwidth.
/// Messages within a phase (distinct links, parallel client pipelines)
/// overlap; phases do not.
pub fn estimate_wallclock(phases: &[PhaseRecord], model: &NetModel) -> f64 {
    phases
        .iter()
        .map(|p| {
            model.latency_ms / 1000.0
                + p.max_link_bytes() as f64 * 8.0 / (model.bandwidth_mbps * 1e6)
        })
        .sum()
}

struct Link {
    queue: VecDeque<Frame>,
    stats: LinkStats,
}

/// The in-process network hub: per-link FIFO queues plus accounting.
pub struct Network {
    links: BTreeMap<(EndpointId, EndpointId), Link>,
    phases: Vec<PhaseRecord>,
}

impl Network {
    /// An empty network.
    pub fn new() -> Self {
        Network {
            links: BTreeMap::new(),
            phases: Vec::new(),
        }
    }

    /// Opens (or reopens) a named accounting phase; subsequent sends count
    /// against it. Reusing a name merges into the existing phase, which is
    /// how per-client pipelines share the three shuffle-pass phases.
    pub fn begin_phase(&mut self, name: &str) {
        if let Some(i) = self.phases.iter().position(|p| p.name == name) {
            let rec = self.phases.remove(i);
            self.phases.push(rec);
            return;
        }
        self.phases.push(PhaseRecord {
            name: name.to_string(),
            per_link_bytes: BTreeMap::new(),
        });
    }

    /// Sends a frame from `from` to `to`.
    pub fn send(
        &mut self,
        from: EndpointId,
        to: EndpointId,
        phase: u8,
        round: u32,
        payload: Payload,
    ) -> Result<(), NetError> {
        let wire = payload.wire_bytes();
        if wire > u32::MAX as u64 {
            return Err(NetError::Oversized(wire));
        }
        let logical = payload.logical_bits();
        let link = self.links.entry((from, to)).or_insert_with(|| Link {
            queue: VecDeque::new(),
            stats: LinkStats::default(),
        });
        link.stats.messages += 1;
        link.stats.payload_bytes += wire;
        link.stats.logical_bits += logical;
        link.queue.push_back(Frame {
            phase,
            round,
            sender: from,
            payload,
        });
        if let Some(rec) = self.phases.last_mut() {
            *rec.per_link_bytes.entry((from, to)).or_insert(0) += wire;
        }
        Ok(())
    }

    /// Receives the next frame on the (from, to) link.
    pub fn recv(&mut self, from: EndpointId, to: EndpointId) -> Result<Frame, NetError> {
        self.links
            .get_mut(&(from, to))
            .and_then(|l| l.queue.pop_front())
            .ok_or(NetError::Empty(from, to))
    }

    /// Stats for one directed link.
    pub fn link_stats(&self, from: EndpointId, to: EndpointId) -> LinkStats {
        self.links
            .get(&(from, to))
            .map(|l| l.stats)
            .unwrap_or_default()
    }

    /// All links with traffic, in deterministic order.
    pub fn all_links(&self) -> Vec<((EndpointId, EndpointId), LinkStats)> {
        self.links.iter().map(|(&k, l)| (k, l.stats)).collect()
    }

    /// Total payload bytes over server-to-server links.
    pub fn inter_server_bytes(&self) -> u64 {
        self.links
            .iter()
            .filter(|((f, t), _)| {
                matches!(f, EndpointId::Server(_)) && matches!(t, EndpointId::Server(_))
            })
            .map(|(_, l)| l.stats.payload_bytes)
            .sum()
    }

    /// Total logical bits uploaded by one client across all servers.
    pub fn client_upload_bits(&self, client: u32) -> u64 {
        self.links
            .iter()
            .filter(|((f, _), _)| *f == EndpointId::Client(client))
            .map(|(_, l)| l.stats.logical_bits)
            .sum()
    }

    /// Recorded phases, in execution order.
    pub fn phases(&self) -> &[PhaseRecord] {
        &self.phases
    }

    /// Clears stats, queues and phases (between rounds).
    pub fn reset(&mut self) {
        self.links.clear();
        self.phases.clear();
    }

    /// True when every queue has been drained.
    pub fn fully_drained(&self) -> bool {
        self.links.values().all(|l| l.queue.is_empty())
    }
}

impl Default for Network {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v)
    }

    const S0: EndpointId = EndpointId::Server(0);
    const S1: EndpointId = EndpointId::Server(1);
    const S2: EndpointId = EndpointId::Server(2);

    #[test]
    fn frame_wire_layout() {
        let frame = Frame {
            phase: 0x42,
            round: 7,
            sender: S1,
            payload: Payload::Elements(vec![fe(1), fe(258)]),
        };
        let bytes = frame.encode();
        assert_eq!(bytes[0], 0x42);
        assert_eq!(&bytes[1..5], &7u32.to_le_bytes());
        assert_eq!(bytes[5], 1);
        assert_eq!(&bytes[6..14], &16u64.to_le_bytes());
        assert_eq!(&bytes[14..22], &1u64.to_le_bytes());
        assert_eq!(&bytes[22..30], &258u64.to_le_bytes());

        let back = Frame::decode_elements(&bytes).unwrap();
        assert_eq!(back.phase, 0x42);
        assert_eq!(back.round, 7);
        assert_eq!(back.sender, S1);
        assert_eq!(back.payload, Payload::Elements(vec![fe(1), fe(258)]));
    }

    #[test]
    fn decode_rejects_truncation() {
        let frame = Frame {
            phase: 1,
            round: 0,
            sender: S0,
            payload: Payload::Elements(vec![fe(5)]),
        };
        let mut bytes = frame.encode();
        bytes.pop();
        assert_eq!(Frame::decode_elements(&bytes), Err(NetError::Truncated));
    }

    #[test]
    fn accounting_counts_bytes_and_bits() {
        let mut net = Network::new();
        net.send(S0, S1, 1, 0, Payload::Elements(vec![fe(1)])).unwrap();
        net.send(S0, S1, 1, 0, Payload::Seeds(vec![Seed([0; 16])]))
            .unwrap();
        let stats = net.link_stats(S0, S1);
        assert_eq!(stats.messages, 2);
        assert_eq!(stats.payload_bytes, 8 + 16);
        assert_eq!(stats.logical_bits, 61 + 128);
        assert_eq!(net.link_stats(S1, S0), LinkStats::default());
    }

    #[test]
    fn in_order_delivery_with_interleaved_links() {
        let mut net = Network::new();
        for i in 0..50u64 {
            net.send(S0, S1, 0, 0, Payload::Elements(vec![fe(i)])).unwrap();
            net.send(S2, S1, 0, 0, Payload::Elements(vec![fe(1000 + i)]))
                .unwrap();
            net.send(S0, S2, 0, 0, Payload::Elements(vec![fe(2000 + i)]))
                .unwrap();
        }
        for i in 0..50u64 {
            assert_eq!(
                net.recv(S0, S1).unwrap().payload,
                Payload::Elements(vec![fe(i)])
            );
            assert_eq!(
                net.recv(S2, S1).unwrap().payload,
                Payload::Elements(vec![fe(1000 + i)])
            );
            assert_eq!(
                net.recv(S0, S2).unwrap().payload,
                Payload::Elements(vec![fe(2000 + i)])
            );
        }
        assert_eq!(net.recv(S0, S1), Err(NetError::Empty(S0, S1)));
        assert_eq!(net.link_stats(S0, S1).messages, 50);
    }

    #[test]
    fn wallclock_reference_points() {
        let model = NetModel::default();
        let mut empty = PhaseRecord {
            name: "p".into(),
            per_link_bytes: BTreeMap::new(),
        };
        assert!((estimate_wallclock(&[empty.clone()], &model) - 0.040).abs() < 1e-12);

        // 100 Mbit = 12.5 MB over 100 Mbps: one second plus latency.
        empty.per_link_bytes.insert((S0, S1), 12_500_000);
        assert!((estimate_wallclock(&[empty.clone()], &model) - 1.040).abs() < 1e-9);

        let one_mb = PhaseRecord {
            name: "q".into(),
            per_link_bytes: BTreeMap::from([((S0, S1), 1_000_000u64)]),
        };
        let three = vec![one_mb.clone(), one_mb.clone(), one_mb];
        assert!((estimate_wallclock(&three, &model) - 0.36).abs() < 1e-9);
    }

    #[test]
    fn phases_merge_by_name() {
        let mut net = Network::new();
        net.begin_phase("pass0");
        net.send(S0, S1, 0, 0, Payload::Elements(vec![fe(1); 10])).unwrap();
        net.begin_phase("pass1");
        net.send(S0, S1, 0, 0, Payload::Elements(vec![fe(1); 5])).unwrap();
        net.begin_phase("pass0");
        net.send(S1, S2, 0, 0, Payload::Elements(vec![fe(1); 4])).unwrap();
        let phases = net.phases();
        assert_eq!(phases.len(), 2);
        // pass0 was reopened, so it now orders after pass1 and holds both links.
        assert_eq!(phases[1].name, "pass0");
        assert_eq!(phases[1].per_link_bytes[&(S0, S1)], 80);
        assert_eq!(phases[1].per_link_bytes[&(S1, S2)], 32);
        assert_eq!(phases[1].max_link_bytes(), 80);
    }

    #[test]
    fn client_upload_bits_sum_across_servers() {
        let mut net = Network::new();
        let c = EndpointId::Client(3);
        net.send(c, S0, 0, 0, Payload::Seeds(vec![Seed([0; 16]); 2]))
            .unwrap();
        net.send(c, S1, 0, 0, Payload::Elements(vec![fe(1); 4])).unwrap();
        net.send(c, S2, 0, 0, Payload::Indices(vec![9, 9])).unwrap();
        assert_eq!(net.client_upload_bits(3), 2 * 128 + 4 * 61 + 2 * 61);
        assert_eq!(net.client_upload_bits(4), 0);
    }
}
