use thiserror::Error;

use crate::types::NodeId;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("edge list line {line}: {msg}")]
    EdgeList { line: usize, msg: String },

    #[error("CT window of {window_us} us needs {needed} slots but the slotframe has {total}")]
    WindowTooLarge {
        window_us: u64,
        needed: u64,
        total: u64,
    },

    #[error("micro-slot {micro_slot} outside flood window of {window} micro-slots")]
    MicroSlotOutOfWindow { micro_slot: u32, window: u32 },

    #[error("reception at {rx_start_us} us cannot be {relay_cnt} micro-slots after flood start")]
    SyncUnderflow { rx_start_us: u64, relay_cnt: u32 },

    #[error("concurrent transmitters carry divergent flood payloads at node {receiver}")]
    DivergentPayload { receiver: NodeId },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("at least one seed is required")]
    NoSeeds,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
