//! Time-triggered concurrent-transmission flood.
//!
//! The initiator transmits in micro-slots `0..n_tx` with relay counter 0. A
//! node that first decodes the flood in micro-slot `k` with relay counter `c`
//! transmits back-to-back in micro-slots `k+1 ..= k+n_tx` carrying `c + 1`,
//! provided `c + 1 <= n_h`; re-receptions never re-arm it. The window is hard
//! truncated at `n_tx + n_h` micro-slots.

use crate::error::{Error, Result};
use crate::phy::{ct_micro_slot_duration, CtTiming};
use crate::topology::Topology;
use crate::types::{Channel, Frame, NodeId, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CtFloodConfig {
    pub n_tx: u32,
    pub n_h: u32,
    pub timing: CtTiming,
    pub initiator: NodeId,
}

impl CtFloodConfig {
    pub fn window(&self) -> u32 {
        self.n_tx + self.n_h
    }

    pub fn micro_slot_us(&self) -> u64 {
        ct_micro_slot_duration(&self.timing)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CtNodeFloodState {
    pub received: bool,
    pub relay_cnt_at_rx: u32,
    /// `None` for the initiator and for nodes not yet reached.
    pub first_rx_micro_slot: Option<u32>,
    pub tx_remaining: u32,
    pub frame: Option<Frame>,
}

impl CtNodeFloodState {
    fn tx_relay_cnt(&self) -> u32 {
        if self.first_rx_micro_slot.is_some() {
            self.relay_cnt_at_rx + 1
        } else {
            0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloodAction {
    Tx { relay_cnt: u32 },
    Rx,
}

/// Flood-origin reference reconstructed by a receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyncReference {
    pub ct0: SimTime,
    pub relay_cnt: u32,
}

/// `CT_0 = rx_start - relay_cnt * T_slot`.
pub fn on_ct_rx(rx_start: SimTime, relay_cnt: u32, timing: &CtTiming) -> Result<SyncReference> {
    let back = relay_cnt as u64 * ct_micro_slot_duration(timing);
    let ct0 = rx_start
        .0
        .checked_sub(back)
        .ok_or(Error::SyncUnderflow { rx_start_us: rx_start.0, relay_cnt })?;
    Ok(SyncReference {
        ct0: SimTime(ct0),
        relay_cnt,
    })
}

/// Initial per-node states: only the initiator holds the frame.
pub fn initial_states(cfg: &CtFloodConfig, node_count: usize, frame: Frame) -> Vec<CtNodeFloodState> {
    let mut states = vec![CtNodeFloodState::default(); node_count];
    let init = &mut states[cfg.initiator.index()];
    init.received = true;
    init.tx_remaining = cfg.n_tx;
    init.frame = Some(frame);
    states
}

/// Per-node action for `micro_slot`; consumes one transmission from every
/// node that transmits.
pub fn flood_step(
    cfg: &CtFloodConfig,
    states: &mut [CtNodeFloodState],
    micro_slot: u32,
) -> Result<Vec<FloodAction>> {
    if micro_slot >= cfg.window() {
        return Err(Error::MicroSlotOutOfWindow {
            micro_slot,
            window: cfg.window(),
        });
    }
    Ok(states
        .iter_mut()
        .map(|s| {
            let eligible = s.received
                && s.tx_remaining > 0
                && s.first_rx_micro_slot.is_none_or(|k| micro_slot > k);
            if eligible {
                s.tx_remaining -= 1;
                FloodAction::Tx { relay_cnt: s.tx_relay_cnt() }
            } else {
                FloodAction::Rx
            }
        })
        .collect())
}

/// Marks `node` as having decoded the flood in `micro_slot`.
pub fn record_reception(
    cfg: &CtFloodConfig,
    state: &mut CtNodeFloodState,
    micro_slot: u32,
    relay_cnt: u32,
    frame: Frame,
) {
    if state.received {
        return;
    }
    state.received = true;
    state.relay_cnt_at_rx = relay_cnt;
    state.first_rx_micro_slot = Some(micro_slot);
    state.tx_remaining = if relay_cnt < cfg.n_h { cfg.n_tx } else { 0 };
    state.frame = Some(frame);
}

/// Receptions decided so far: who transmitted and who decoded what.
#[derive(Clone, Debug)]
pub struct FloodRun {
    pub cfg: CtFloodConfig,
    pub channel: Channel,
    pub start: SimTime,
    pub states: Vec<CtNodeFloodState>,
    next_micro_slot: u32,
}

/// A transmitter heard by a receiver in one micro-slot.
#[derive(Clone, Copy, Debug)]
pub struct Heard<'a> {
    pub node: NodeId,
    pub relay_cnt: u32,
    pub frame: &'a Frame,
}

impl FloodRun {
    pub fn new(cfg: CtFloodConfig, channel: Channel, start: SimTime, node_count: usize, frame: Frame) -> Self {
        FloodRun {
            states: initial_states(&cfg, node_count, frame),
            cfg,
            channel,
            start,
            next_micro_slot: 0,
        }
    }

    pub fn micro_slot_start(&self, micro_slot: u32) -> SimTime {
        self.start + micro_slot as u64 * self.cfg.micro_slot_us()
    }

    pub fn is_done(&self) -> bool {
        self.next_micro_slot >= self.cfg.window()
    }

    pub fn next_micro_slot(&self) -> u32 {
        self.next_micro_slot
    }

    /// Executes the next micro-slot. `decide(receiver, heard, micro_slot)`
    /// returns whether the receiver decodes given the in-range transmitters.
    /// A decoding receiver adopts the largest relay counter it heard.
    pub fn step<F>(&mut self, topology: &Topology, mut decide: F) -> Result<Vec<NodeId>>
    where
        F: FnMut(NodeId, &[Heard<'_>], u32) -> Result<bool>,
    {
        let m = self.next_micro_slot;
        let actions = flood_step(&self.cfg, &mut self.states, m)?;
        self.next_micro_slot += 1;
        let mut decoded = Vec::new();
        for rx in topology.nodes() {
            if actions[rx.index()] != FloodAction::Rx || self.states[rx.index()].received {
                continue;
            }
            let heard: Vec<Heard<'_>> = topology
                .inbound(rx)
                .filter(|l| l.prr_on(self.channel) > 0.0)
                .filter_map(|l| match actions[l.src.index()] {
                    FloodAction::Tx { relay_cnt } => Some(Heard {
                        node: l.src,
                        relay_cnt,
                        frame: self.states[l.src.index()].frame.as_ref().unwrap(),
                    }),
                    FloodAction::Rx => None,
                })
                .collect();
            if heard.is_empty() {
                continue;
            }
            if decide(rx, &heard, m)? {
                let relay = heard.iter().map(|h| h.relay_cnt).max().unwrap();
                decoded.push((rx, relay, heard[0].frame.clone()));
            }
        }
        let nodes = decoded.iter().map(|d| d.0).collect();
        for (rx, relay, frame) in decoded {
            record_reception(&self.cfg, &mut self.states[rx.index()], m, relay, frame);
        }
        Ok(nodes)
    }

    pub fn outcome(&self) -> Result<Vec<FloodNodeOutcome>> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let node = NodeId::from(i);
                if node == self.cfg.initiator {
                    return Ok(FloodNodeOutcome {
                        node,
                        reached: true,
                        first_rx_micro_slot: None,
                        relay_cnt: None,
                        sync: None,
                    });
                }
                match s.first_rx_micro_slot {
                    Some(m) => Ok(FloodNodeOutcome {
                        node,
                        reached: true,
                        first_rx_micro_slot: Some(m),
                        relay_cnt: Some(s.relay_cnt_at_rx),
                        sync: Some(on_ct_rx(self.micro_slot_start(m), s.relay_cnt_at_rx, &self.cfg.timing)?),
                    }),
                    None => Ok(FloodNodeOutcome {
                        node,
                        reached: false,
                        first_rx_micro_slot: None,
                        relay_cnt: None,
                        sync: None,
                    }),
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FloodNodeOutcome {
    pub node: NodeId,
    pub reached: bool,
    pub first_rx_micro_slot: Option<u32>,
    pub relay_cnt: Option<u32>,
    pub sync: Option<SyncReference>,
}

/// Runs a whole flood. Deterministic for a deterministic `decide`.
pub fn flood_outcome<F>(
    cfg: CtFloodConfig,
    topology: &Topology,
    channel: Channel,
    start: SimTime,
    frame: Frame,
    mut decide: F,
) -> Result<Vec<FloodNodeOutcome>>
where
    F: FnMut(NodeId, &[Heard<'_>], u32) -> Result<bool>,
{
    let mut run = FloodRun::new(cfg, channel, start, topology.node_count(), frame);
    while !run.is_done() {
        run.step(topology, &mut decide)?;
    }
    run.outcome()
}
