//! Identities, simulated time and frames shared by every layer.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// Simulated true time, in microseconds since experiment start.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    /// Elapsed microseconds since `earlier`, saturating at zero.
    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, us: u64) -> SimTime {
        SimTime(self.0 + us)
    }
}

impl Sub<u64> for SimTime {
    type Output = SimTime;
    fn sub(self, us: u64) -> SimTime {
        SimTime(self.0 - us)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Node identity. Ids are dense in `[0, node_count)`; id 0 is the coordinator.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct NodeId(pub u16);

impl NodeId {
    pub const COORDINATOR: NodeId = NodeId(0);
    /// Destination sentinel for network-wide frames.
    pub const BROADCAST: NodeId = NodeId(u16::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_broadcast(self) -> bool {
        self == Self::BROADCAST
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u16)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_broadcast() {
            f.write_str("*")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Radio channel number. TSCH uses 11..=26, the CT plane defaults to 37..=39.
pub type Channel = u8;

/// Absolute slot number since the network epoch.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Asn(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameKind {
    Eb,
    Ka,
    Dao,
    DaoAck,
    Data,
}

impl FrameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Eb => "EB",
            FrameKind::Ka => "KA",
            FrameKind::Dao => "DAO",
            FrameKind::DaoAck => "DAO_ACK",
            FrameKind::Data => "DATA",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kind-specific frame content.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrameMeta {
    /// Join information: the sender's ASN and its RPL rank (if joined).
    Eb { asn: Asn, rank: Option<u16> },
    Ka,
    /// `path` lists every node the DAO has traversed, origin first.
    Dao { dao_seq: u32, path: Vec<NodeId> },
    DaoAck { acked: Vec<(NodeId, u32)> },
    Data { app_seq: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub seq: u32,
    pub payload_bytes: u16,
    pub born_at: SimTime,
    pub meta: FrameMeta,
}

impl Frame {
    pub fn new(src: NodeId, dst: NodeId, seq: u32, born_at: SimTime, meta: FrameMeta) -> Self {
        let (kind, payload_bytes) = match &meta {
            FrameMeta::Eb { .. } => (FrameKind::Eb, 30),
            FrameMeta::Ka => (FrameKind::Ka, 1),
            FrameMeta::Dao { path, .. } => (FrameKind::Dao, 20 + 2 * path.len() as u16),
            FrameMeta::DaoAck { acked } => (FrameKind::DaoAck, 4 + 2 * acked.len() as u16),
            FrameMeta::Data { .. } => (FrameKind::Data, 64),
        };
        Frame {
            kind,
            src,
            dst,
            seq,
            payload_bytes,
            born_at,
            meta,
        }
    }

    pub fn with_payload_bytes(mut self, bytes: u16) -> Self {
        self.payload_bytes = bytes.max(1);
        self
    }
}
