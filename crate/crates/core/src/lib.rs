//! Simulator for concurrent-transmission (CT) floods interleaved with a TSCH
//! slotframe, compared against a 6TiSCH-minimal baseline that relies on
//! beacons and hop-by-hop unicast in a single shared slot.
//!
//! The layers are usable on their own: [`phy`] and [`schedule`] answer
//! capacity and layout questions, [`ctflood`] runs a single flood over a
//! [`topology::Topology`], and [`sim`] drives whole networks.

pub mod ctflood;
pub mod error;
pub mod metrics;
pub mod phy;
pub mod report;
pub mod rng;
pub mod rpl;
pub mod scenario;
pub mod schedule;
pub mod sim;
pub mod topology;
pub mod tschmac;
pub mod types;

pub use error::{Error, Result};
pub use types::{Asn, Channel, Frame, FrameKind, FrameMeta, NodeId, SimTime};
