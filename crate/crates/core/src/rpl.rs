//! Min-hop RPL stand-in: parent selection, DAO registration with
//! retransmission, and DAO-ACK delivery hop by hop or batched into floods.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::types::{Frame, FrameMeta, NodeId, SimTime};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RplConfig {
    pub dao_timeout_ms: u64,
    pub dao_timeout_cap_ms: u64,
    /// Uniform delay before the first DAO after joining.
    pub dao_delay_ms: u64,
    pub parent_check_ms: u64,
}

impl Default for RplConfig {
    fn default() -> Self {
        RplConfig {
            dao_timeout_ms: 3_000,
            dao_timeout_cap_ms: 60_000,
            dao_delay_ms: 4_000,
            parent_check_ms: 1_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DaoState {
    #[default]
    Idle,
    WaitingAck,
    Acked,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RplNodeState {
    pub parent: Option<NodeId>,
    pub rank: Option<u16>,
    pub dao_state: DaoState,
    pub dao_seq: u32,
    /// Transmissions of the current DAO so far.
    pub dao_tx_count: u32,
    pub retransmit_timer_ms: u64,
    pub dao_sent_at: Option<SimTime>,
    pub first_dao_at: Option<SimTime>,
    pub acked_at: Option<SimTime>,
    pub hops_at_ack: Option<u16>,
}

impl RplNodeState {
    pub fn root() -> Self {
        RplNodeState {
            rank: Some(0),
            dao_state: DaoState::Acked,
            ..Default::default()
        }
    }

    pub fn is_joined(&self) -> bool {
        self.rank.is_some()
    }
}

/// Neighbour with the lowest rank, ties to the lowest id.
pub fn select_parent(neighbor_ranks: &[(NodeId, u16)]) -> Option<(NodeId, u16)> {
    neighbor_ranks.iter().copied().min_by_key(|&(id, rank)| (rank, id))
}

/// Applies a parent choice. Returns `true` when the parent changed.
pub fn adopt_parent(state: &mut RplNodeState, choice: Option<(NodeId, u16)>) -> bool {
    if state.rank == Some(0) && state.parent.is_none() {
        return false;
    }
    let Some((parent, prank)) = choice else {
        if state.parent.take().is_some() {
            state.rank = None;
            if state.dao_state == DaoState::WaitingAck {
                state.dao_state = DaoState::Idle;
            }
            return true;
        }
        return false;
    };
    state.rank = Some(prank + 1);
    let changed = state.parent != Some(parent);
    state.parent = Some(parent);
    changed
}

/// Delay after the `k`-th transmission (k >= 1): `t, t, 2t, 4t, ...` capped.
pub fn dao_retx_delay_ms(cfg: &RplConfig, k: u32) -> u64 {
    let doublings = k.saturating_sub(2).min(32);
    cfg.dao_timeout_ms
        .saturating_mul(1u64 << doublings)
        .min(cfg.dao_timeout_cap_ms)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DaoSend {
    pub frame: Frame,
    pub parent: NodeId,
    pub retransmission: bool,
    /// When the retransmission timer fires.
    pub timeout: SimTime,
}

/// Emits the DAO (or its retransmission) when one is due.
pub fn dao_tick(cfg: &RplConfig, node: NodeId, state: &mut RplNodeState, now: SimTime) -> Option<DaoSend> {
    let parent = state.parent?;
    let retransmission = match state.dao_state {
        DaoState::Acked => return None,
        DaoState::Idle => {
            state.dao_seq += 1;
            state.dao_tx_count = 0;
            state.dao_state = DaoState::WaitingAck;
            state.first_dao_at.get_or_insert(now);
            false
        }
        DaoState::WaitingAck => true,
    };
    state.dao_tx_count += 1;
    state.dao_sent_at = Some(now);
    state.retransmit_timer_ms = dao_retx_delay_ms(cfg, state.dao_tx_count);
    let frame = Frame::new(
        node,
        NodeId::COORDINATOR,
        state.dao_seq,
        now,
        FrameMeta::Dao { dao_seq: state.dao_seq, path: vec![node] },
    );
    Some(DaoSend {
        frame,
        parent,
        retransmission,
        timeout: now + state.retransmit_timer_ms * 1_000,
    })
}

/// Restarts registration after a parent switch.
pub fn restart_dao(state: &mut RplNodeState) {
    if state.dao_state != DaoState::Idle {
        state.dao_state = DaoState::Idle;
    }
}

/// Accepts an ACK for the current DAO sequence only.
pub fn on_dao_ack(state: &mut RplNodeState, seq: u32, hops: u16, now: SimTime) -> bool {
    if state.dao_state != DaoState::WaitingAck || seq != state.dao_seq {
        return false;
    }
    state.dao_state = DaoState::Acked;
    state.acked_at.get_or_insert(now);
    state.hops_at_ack.get_or_insert(hops);
    true
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RootRoutingTable {
    /// Upward path recorded from each node's latest DAO, origin first.
    pub routes: BTreeMap<NodeId, Vec<NodeId>>,
    pub pending_acks: VecDeque<(NodeId, u32)>,
}

impl RootRoutingTable {
    pub fn record_dao(&mut self, path: &[NodeId]) {
        if let Some(&origin) = path.first() {
            self.routes.insert(origin, path.to_vec());
        }
    }

    /// Downward source route from the root: next hop first, `dst` last.
    pub fn downward_route(&self, dst: NodeId) -> Option<Vec<NodeId>> {
        self.routes.get(&dst).map(|p| p.iter().rev().copied().collect())
    }

    pub fn queue_ack(&mut self, node: NodeId, seq: u32) {
        if let Some(e) = self.pending_acks.iter_mut().find(|(n, _)| *n == node) {
            e.1 = seq;
        } else {
            self.pending_acks.push_back((node, seq));
        }
    }
}

/// DAO-ACK unicast back along the reverse of the recorded path. Returns the
/// frame with its full downward route (next hop first).
pub fn root_ack_baseline(table: &mut RootRoutingTable, dao: &Frame, now: SimTime) -> Option<(Frame, Vec<NodeId>)> {
    let FrameMeta::Dao { dao_seq, path } = &dao.meta else {
        return None;
    };
    table.record_dao(path);
    let origin = *path.first()?;
    let route = table.downward_route(origin)?;
    let ack = Frame::new(
        NodeId::COORDINATOR,
        origin,
        *dao_seq,
        now,
        FrameMeta::DaoAck { acked: vec![(origin, *dao_seq)] },
    );
    Some((ack, route))
}

/// Flood header bytes reserved in every CT payload.
pub const FLOOD_HEADER_BYTES: u32 = 6;
/// Bytes per acknowledged node id in a batch.
pub const ACK_ID_BYTES: u32 = 2;

pub fn ack_batch_capacity(payload_bytes: u32) -> usize {
    (payload_bytes.saturating_sub(FLOOD_HEADER_BYTES) / ACK_ID_BYTES) as usize
}

/// Drains as many pending ACKs as fit in one flood payload, FIFO.
pub fn root_ack_6pp(table: &mut RootRoutingTable, payload_bytes: u32) -> Vec<(NodeId, u32)> {
    let n = ack_batch_capacity(payload_bytes).min(table.pending_acks.len());
    table.pending_acks.drain(..n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_selection() {
        assert_eq!(select_parent(&[(NodeId(5), 2), (NodeId(9), 1)]), Some((NodeId(9), 1)));
        assert_eq!(select_parent(&[(NodeId(7), 1), (NodeId(3), 1)]), Some((NodeId(3), 1)));
        assert_eq!(select_parent(&[]), None);
        let mut root = RplNodeState::root();
        assert!(!adopt_parent(&mut root, Some((NodeId(3), 0))));
        assert_eq!((root.parent, root.rank), (None, Some(0)));
    }

    #[test]
    fn rank_follows_parent() {
        let mut s = RplNodeState::default();
        assert!(adopt_parent(&mut s, Some((NodeId(2), 3))));
        assert_eq!(s.rank, Some(4));
        assert!(!adopt_parent(&mut s, Some((NodeId(2), 3))));
        assert!(adopt_parent(&mut s, None));
        assert_eq!((s.parent, s.rank), (None, None));
    }

    #[test]
    fn dao_retransmission_trace() {
        let cfg = RplConfig::default();
        let mut s = RplNodeState { parent: Some(NodeId(1)), rank: Some(2), ..Default::default() };
        let first = dao_tick(&cfg, NodeId(4), &mut s, SimTime::ZERO).unwrap();
        assert!(!first.retransmission);
        assert_eq!(first.timeout, SimTime::from_secs(3));
        let r1 = dao_tick(&cfg, NodeId(4), &mut s, first.timeout).unwrap();
        assert!(r1.retransmission);
        assert_eq!(r1.timeout, SimTime::from_secs(6));
        let r2 = dao_tick(&cfg, NodeId(4), &mut s, r1.timeout).unwrap();
        assert_eq!(r2.timeout, SimTime::from_secs(12));
        assert_eq!(r2.frame.seq, first.frame.seq);
        assert_eq!(s.first_dao_at, Some(SimTime::ZERO));
    }

    #[test]
    fn retx_delay_caps() {
        let cfg = RplConfig::default();
        let d: Vec<_> = (1..=8).map(|k| dao_retx_delay_ms(&cfg, k)).collect();
        assert_eq!(d, vec![3_000, 3_000, 6_000, 12_000, 24_000, 48_000, 60_000, 60_000]);
        assert_eq!(dao_retx_delay_ms(&cfg, 200), 60_000);
    }

    #[test]
    fn ack_handling() {
        let cfg = RplConfig::default();
        let mut s = RplNodeState { parent: Some(NodeId(0)), rank: Some(1), ..Default::default() };
        dao_tick(&cfg, NodeId(1), &mut s, SimTime::ZERO).unwrap();
        let seq = s.dao_seq;
        assert!(!on_dao_ack(&mut s, seq + 1, 1, SimTime(5)));
        assert!(on_dao_ack(&mut s, seq, 1, SimTime(10)));
        assert_eq!(s.dao_state, DaoState::Acked);
        assert!(dao_tick(&cfg, NodeId(1), &mut s, SimTime(20)).is_none());
        assert!(!on_dao_ack(&mut s, seq, 1, SimTime(30)));
        assert_eq!(s.acked_at, Some(SimTime(10)));
    }

    #[test]
    fn parent_loss_resets() {
        let cfg = RplConfig::default();
        let mut s = RplNodeState { parent: Some(NodeId(2)), rank: Some(2), ..Default::default() };
        dao_tick(&cfg, NodeId(5), &mut s, SimTime::ZERO);
        adopt_parent(&mut s, None);
        assert_eq!(s.dao_state, DaoState::Idle);
        assert!(dao_tick(&cfg, NodeId(5), &mut s, SimTime(1)).is_none());
    }

    #[test]
    fn baseline_ack_route() {
        let mut t = RootRoutingTable::default();
        let path = vec![NodeId(9), NodeId(4), NodeId(2)];
        let dao = Frame::new(NodeId(9), NodeId(0), 1, SimTime::ZERO, FrameMeta::Dao { dao_seq: 1, path });
        let (ack, route) = root_ack_baseline(&mut t, &dao, SimTime(7)).unwrap();
        assert_eq!(route, vec![NodeId(2), NodeId(4), NodeId(9)]);
        assert_eq!(ack.dst, NodeId(9));
        // ten hops below the root need ten transmissions
        let long: Vec<NodeId> = (1..=10u16).rev().map(NodeId).collect();
        t.record_dao(&long);
        assert_eq!(t.downward_route(NodeId(10)).unwrap().len(), 10);
    }

    #[test]
    fn flood_ack_batching() {
        assert_eq!(ack_batch_capacity(64), 29);
        let mut t = RootRoutingTable::default();
        for i in 1..=3u16 {
            t.queue_ack(NodeId(i), 1);
        }
        assert_eq!(root_ack_6pp(&mut t, 64).len(), 3);
        for i in 1..=40u16 {
            t.queue_ack(NodeId(i), 1);
        }
        let k = root_ack_6pp(&mut t, 64);
        let k1 = root_ack_6pp(&mut t, 64);
        assert_eq!((k.len(), k1.len()), (29, 11));
        assert_eq!(k[0].0, NodeId(1));
        assert_eq!(k1[0].0, NodeId(30));
    }

    #[test]
    fn requeue_updates_seq_in_place() {
        let mut t = RootRoutingTable::default();
        t.queue_ack(NodeId(3), 1);
        t.queue_ack(NodeId(4), 1);
        t.queue_ack(NodeId(3), 2);
        assert_eq!(t.pending_acks, VecDeque::from(vec![(NodeId(3), 2), (NodeId(4), 1)]));
    }
}
