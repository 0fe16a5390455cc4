//! Seeded random substreams, one per (node, purpose).
//!
//! Every consumer draws from its own ChaCha stream so that enabling one
//! mechanism (e.g. the jammer) never shifts the draws of an unrelated one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::types::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Purpose {
    Clock = 1,
    Reception = 2,
    Ack = 3,
    Backoff = 4,
    Beacon = 5,
    Routing = 6,
    Scan = 7,
    Flood = 8,
}

const PURPOSES: [Purpose; 8] = [
    Purpose::Clock,
    Purpose::Reception,
    Purpose::Ack,
    Purpose::Backoff,
    Purpose::Beacon,
    Purpose::Routing,
    Purpose::Scan,
    Purpose::Flood,
];

/// Derives an independent stream for `(node, purpose)` from `seed`.
pub fn substream(seed: u64, node: NodeId, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((node.0 as u64) << 8) | purpose as u64);
    rng
}

/// All substreams of one simulation run.
#[derive(Clone, Debug)]
pub struct RngStreams {
    seed: u64,
    streams: Vec<ChaCha8Rng>,
}

impl RngStreams {
    pub fn new(seed: u64, node_count: usize) -> Self {
        let streams = (0..node_count)
            .flat_map(|n| PURPOSES.iter().map(move |&p| substream(seed, NodeId::from(n), p)))
            .collect();
        RngStreams { seed, streams }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&mut self, node: NodeId, purpose: Purpose) -> &mut ChaCha8Rng {
        let slot = PURPOSES.iter().position(|&p| p == purpose).unwrap();
        &mut self.streams[node.index() * PURPOSES.len() + slot]
    }
}
