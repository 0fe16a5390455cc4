//! TSCH MAC state for both stacks: shared-slot CSMA, EB/KA beaconing for the
//! 6TiSCH-minimal baseline, association, and clock drift with resync.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ctflood::SyncReference;
use crate::schedule::HoppingConfig;
use crate::types::{Asn, Channel, Frame, FrameKind, FrameMeta, NodeId, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MacMode {
    #[serde(rename = "baseline")]
    Baseline6TischMinimal,
    #[serde(rename = "6pp")]
    SixPp,
}

impl MacMode {
    pub fn name(self) -> &'static str {
        match self {
            MacMode::Baseline6TischMinimal => "baseline",
            MacMode::SixPp => "6pp",
        }
    }

    pub fn beacons_enabled(self) -> bool {
        self == MacMode::Baseline6TischMinimal
    }
}

impl std::str::FromStr for MacMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "6tisch" => Ok(MacMode::Baseline6TischMinimal),
            "6pp" | "sixpp" => Ok(MacMode::SixPp),
            _ => Err(format!("unknown mode `{s}` (valid: baseline, 6pp)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacConfig {
    pub guard_us: u64,
    pub eb_period_ms: u64,
    /// Uniform jitter of each EB period, in percent.
    pub eb_jitter_pct: u64,
    pub ka_period_ms: u64,
    pub min_be: u32,
    pub max_be: u32,
    pub max_retries: u32,
    pub queue_capacity: usize,
    /// How long an unassociated baseline node listens on one channel.
    pub scan_dwell_ms: u64,
    /// Slotframe length of the 6TiSCH-minimal baseline (one shared slot).
    pub baseline_slotframe: u64,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            guard_us: 1_000,
            eb_period_ms: 4_000,
            eb_jitter_pct: 10,
            ka_period_ms: 10_000,
            min_be: 1,
            max_be: 7,
            max_retries: 3,
            queue_capacity: 64,
            scan_dwell_ms: 1_000,
            baseline_slotframe: 1,
        }
    }
}

/// Oscillator of one node: `local(t) = t * (1 + drift) + offset`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClockModel {
    pub drift_ppb: i64,
    pub offset_ns: i64,
}

impl ClockModel {
    pub fn from_ppm(ppm: f64) -> Self {
        ClockModel {
            drift_ppb: (ppm * 1_000.0).round() as i64,
            offset_ns: 0,
        }
    }

    pub fn drift_ppm(&self) -> f64 {
        self.drift_ppb as f64 / 1_000.0
    }

    pub fn local_ns(&self, t: SimTime) -> i64 {
        let t = t.0 as i128;
        (t * 1_000 + t * self.drift_ppb as i128 / 1_000_000) as i64 + self.offset_ns
    }
}

/// Drift of `t_us` microseconds at `ppb`, in nanoseconds.
pub fn drift_ns(ppb: i64, t_us: u64) -> i64 {
    (ppb as i128 * t_us as i128 / 1_000_000) as i64
}

/// Slot-boundary error relative to the node's time source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyncState {
    pub anchor: SimTime,
    pub residual_ns: i64,
    pub relative_drift_ppb: i64,
}

impl SyncState {
    pub fn error_ns(&self, t: SimTime) -> i64 {
        self.residual_ns + drift_ns(self.relative_drift_ppb, t.since(self.anchor))
    }

    /// First instant at which `|error| >= guard`, `None` if never.
    pub fn desync_time(&self, guard_us: u64) -> Option<SimTime> {
        let guard = guard_us as i128 * 1_000;
        let r = self.relative_drift_ppb as i128;
        let e0 = self.residual_ns as i128;
        if e0.abs() >= guard {
            return Some(self.anchor);
        }
        if r == 0 {
            return None;
        }
        let room = if r > 0 { guard - e0 } else { guard + e0 };
        let dt = (room * 1_000_000 + r.abs() - 1) / r.abs();
        Some(self.anchor + dt as u64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueuedFrame {
    pub frame: Frame,
    pub next_hop: NodeId,
    /// Remaining source route after `next_hop`.
    pub route: Vec<NodeId>,
    pub retries: u32,
    /// Link-layer sequence number, for duplicate rejection at the receiver.
    pub dsn: u32,
}

impl QueuedFrame {
    pub fn broadcast(frame: Frame) -> Self {
        QueuedFrame {
            frame,
            next_hop: NodeId::BROADCAST,
            route: Vec::new(),
            retries: 0,
            dsn: 0,
        }
    }

    pub fn unicast(frame: Frame, next_hop: NodeId, route: Vec<NodeId>) -> Self {
        QueuedFrame {
            frame,
            next_hop,
            route,
            retries: 0,
            dsn: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TschNodeState {
    pub associated: bool,
    pub asn_estimate: Option<Asn>,
    pub time_source: Option<NodeId>,
    pub sync: Option<SyncState>,
    pub last_sync_at: SimTime,
    pub tx_queue: VecDeque<QueuedFrame>,
    pub backoff_exponent: u32,
    pub backoff_counter: u32,
    pub associated_at: Option<SimTime>,
    pub max_sync_error_ns: i64,
    pub desync_count: u32,
    /// Bumped on every (re)sync so stale desync timers can be ignored.
    pub sync_generation: u64,
    pub scan_start_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContentionAction {
    Tx,
    Defer,
}

impl TschNodeState {
    pub fn new(min_be: u32) -> Self {
        TschNodeState {
            backoff_exponent: min_be,
            ..Default::default()
        }
    }

    pub fn sync_error_ns(&self, t: SimTime) -> Option<i64> {
        self.sync.map(|s| s.error_ns(t))
    }

    /// Appends a frame unless the queue is full.
    pub fn enqueue(&mut self, cfg: &MacConfig, qf: QueuedFrame) -> bool {
        if self.tx_queue.len() >= cfg.queue_capacity {
            return false;
        }
        self.tx_queue.push_back(qf);
        true
    }

    pub fn has_queued(&self, kind: FrameKind) -> bool {
        self.tx_queue.iter().any(|q| q.frame.kind == kind)
    }

    /// Outcome of the head-of-queue transmission. Returns the frame when it
    /// leaves the queue (delivered, broadcast, or dropped after the last
    /// retry) together with whether it was delivered.
    pub fn on_tx_result(
        &mut self,
        cfg: &MacConfig,
        acked: bool,
        rng: &mut impl Rng,
    ) -> Option<(QueuedFrame, bool)> {
        let head = self.tx_queue.front_mut()?;
        if head.next_hop.is_broadcast() {
            return self.tx_queue.pop_front().map(|q| (q, true));
        }
        if acked {
            self.backoff_exponent = cfg.min_be;
            self.backoff_counter = 0;
            return self.tx_queue.pop_front().map(|q| (q, true));
        }
        head.retries += 1;
        let dropped = head.retries > cfg.max_retries;
        let window = 1u32 << self.backoff_exponent;
        self.backoff_counter = rng.random_range(0..window);
        self.backoff_exponent = (self.backoff_exponent + 1).min(cfg.max_be);
        if dropped {
            self.backoff_exponent = cfg.min_be;
            return self.tx_queue.pop_front().map(|q| (q, false));
        }
        None
    }

    /// Forgets everything tied to the network after desynchronising.
    pub fn disassociate(&mut self, cfg: &MacConfig) {
        self.associated = false;
        self.asn_estimate = None;
        self.time_source = None;
        self.sync = None;
        self.tx_queue.clear();
        self.backoff_exponent = cfg.min_be;
        self.backoff_counter = 0;
        self.sync_generation += 1;
        self.desync_count += 1;
    }
}

/// Shared-slot contention: nodes with a pending frame and an expired backoff
/// counter transmit; the others count one eligible slot down.
pub fn shared_slot_contention(states: &mut [TschNodeState]) -> Vec<ContentionAction> {
    states
        .iter_mut()
        .map(|s| {
            if !s.associated || s.tx_queue.is_empty() {
                ContentionAction::Defer
            } else if s.backoff_counter == 0 {
                ContentionAction::Tx
            } else {
                s.backoff_counter -= 1;
                ContentionAction::Defer
            }
        })
        .collect()
}

/// Next EB emission time, `period * (1 ± jitter)`.
pub fn next_eb_time(cfg: &MacConfig, now: SimTime, rng: &mut impl Rng) -> SimTime {
    let period = cfg.eb_period_ms * 1_000;
    let spread = period * cfg.eb_jitter_pct / 100;
    now + rng.random_range(period - spread..=period + spread)
}

/// Baseline EB emission for an associated node (or the coordinator).
pub fn baseline_eb_tick(
    mode: MacMode,
    node: NodeId,
    state: &TschNodeState,
    rank: Option<u16>,
    asn: Asn,
    seq: u32,
    now: SimTime,
) -> Option<Frame> {
    if !mode.beacons_enabled() || !(state.associated || node == NodeId::COORDINATOR) {
        return None;
    }
    Some(Frame::new(node, NodeId::BROADCAST, seq, now, FrameMeta::Eb { asn, rank }))
}

/// A KA toward the time source once `ka_period` has elapsed without sync.
pub fn keepalive_tick(
    mode: MacMode,
    cfg: &MacConfig,
    node: NodeId,
    state: &TschNodeState,
    seq: u32,
    now: SimTime,
) -> Option<QueuedFrame> {
    if !mode.beacons_enabled() || !state.associated || state.has_queued(FrameKind::Ka) {
        return None;
    }
    let source = state.time_source?;
    if now.since(state.last_sync_at) < cfg.ka_period_ms * 1_000 {
        return None;
    }
    let ka = Frame::new(node, source, seq, now, FrameMeta::Ka);
    Some(QueuedFrame::unicast(ka, source, Vec::new()))
}

/// Where a resync takes its time from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyncSource {
    /// CT flood reference with the true flood start for the residual.
    Flood { reference: SyncReference, flood_start: SimTime, micro_slot_us: u64 },
    /// EB or KA-acknowledgement from a neighbour.
    Neighbor(NodeId),
}

/// Realigns the node to its time source; returns the error just before.
pub fn resync(
    state: &mut TschNodeState,
    relative_drift_ppb: i64,
    source: SyncSource,
    now: SimTime,
) -> i64 {
    let before = state.sync_error_ns(now).unwrap_or(0);
    state.max_sync_error_ns = state.max_sync_error_ns.max(before.abs());
    let residual_ns = match source {
        SyncSource::Flood { reference, flood_start, micro_slot_us } => {
            // offset from misattributed relay counters, plus drift over the
            // micro-slots measured with the local clock
            let quant = (reference.ct0.0 as i64 - flood_start.0 as i64) * 1_000;
            quant + drift_ns(relative_drift_ppb, reference.relay_cnt as u64 * micro_slot_us)
        }
        SyncSource::Neighbor(_) => 0,
    };
    state.sync = Some(SyncState {
        anchor: now,
        residual_ns,
        relative_drift_ppb,
    });
    state.last_sync_at = now;
    state.sync_generation += 1;
    before
}

/// Associates on an EB (baseline) or a flood (6PP). Returns `true` only on
/// the transition to associated; already associated nodes just resync.
pub fn try_associate(
    state: &mut TschNodeState,
    frame: &Frame,
    relative_drift_ppb: i64,
    source: SyncSource,
    now: SimTime,
) -> bool {
    let FrameMeta::Eb { asn, .. } = frame.meta else {
        return false;
    };
    let newly = !state.associated;
    state.associated = true;
    state.asn_estimate = Some(asn);
    if newly {
        state.time_source = Some(match source {
            SyncSource::Neighbor(n) => n,
            SyncSource::Flood { .. } => NodeId::COORDINATOR,
        });
        state.associated_at.get_or_insert(now);
        state.sync = None;
    }
    resync(state, relative_drift_ppb, source, now);
    newly
}

/// Channel an unassociated baseline node listens on at `now`.
pub fn scan_channel(hopping: &HoppingConfig, cfg: &MacConfig, start_index: usize, now: SimTime) -> Channel {
    let dwell = (cfg.scan_dwell_ms * 1_000).max(1);
    let n = hopping.tsch_channels.len();
    hopping.tsch_channels[(start_index + (now.0 / dwell) as usize) % n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{CtTiming, PhyMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eb(asn: u64) -> Frame {
        Frame::new(NodeId(0), NodeId::BROADCAST, 0, SimTime::ZERO, FrameMeta::Eb { asn: Asn(asn), rank: Some(0) })
    }

    fn unicast(dst: u16) -> QueuedFrame {
        let f = Frame::new(NodeId(1), NodeId(dst), 0, SimTime::ZERO, FrameMeta::Ka);
        QueuedFrame::unicast(f, NodeId(dst), vec![])
    }

    #[test]
    fn contention_examples() {
        let cfg = MacConfig::default();
        let mut s = vec![TschNodeState::new(1), TschNodeState::new(1)];
        for st in &mut s {
            st.associated = true;
        }
        s[0].enqueue(&cfg, unicast(2));
        assert_eq!(shared_slot_contention(&mut s), vec![ContentionAction::Tx, ContentionAction::Defer]);
        s[1].enqueue(&cfg, unicast(2));
        assert_eq!(shared_slot_contention(&mut s), vec![ContentionAction::Tx, ContentionAction::Tx]);
    }

    #[test]
    fn backoff_counts_down() {
        let mut s = vec![TschNodeState::new(1)];
        s[0].associated = true;
        s[0].enqueue(&MacConfig::default(), unicast(2));
        s[0].backoff_counter = 3;
        let trace: Vec<_> = (0..4).map(|_| shared_slot_contention(&mut s)[0]).collect();
        use ContentionAction::*;
        assert_eq!(trace, vec![Defer, Defer, Defer, Tx]);
    }

    #[test]
    fn backoff_window_grows_and_resets() {
        let cfg = MacConfig { max_retries: 10, ..Default::default() };
        let mut s = TschNodeState::new(cfg.min_be);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        s.enqueue(&cfg, unicast(2));
        for k in 0..8 {
            let be = s.backoff_exponent;
            assert!(s.on_tx_result(&cfg, false, &mut rng).is_none());
            assert!(s.backoff_counter < (1 << be));
            assert_eq!(s.backoff_exponent, (cfg.min_be + k + 1).min(cfg.max_be));
        }
        let (_, ok) = s.on_tx_result(&cfg, true, &mut rng).unwrap();
        assert!(ok);
        assert_eq!(s.backoff_exponent, cfg.min_be);
    }

    #[test]
    fn retries_exhausted_drop() {
        let cfg = MacConfig { max_retries: 2, ..Default::default() };
        let mut s = TschNodeState::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        s.enqueue(&cfg, unicast(2));
        assert!(s.on_tx_result(&cfg, false, &mut rng).is_none());
        assert!(s.on_tx_result(&cfg, false, &mut rng).is_none());
        let (q, ok) = s.on_tx_result(&cfg, false, &mut rng).unwrap();
        assert!(!ok);
        assert_eq!(q.retries, 3);
        assert!(s.tx_queue.is_empty());
    }

    #[test]
    fn eb_schedule_jitter() {
        let cfg = MacConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = SimTime::ZERO;
        for k in 1..=50u64 {
            t = next_eb_time(&cfg, t, &mut rng);
            assert!(t.0 >= k * 3_600_000 && t.0 <= k * 4_400_000);
        }
    }

    #[test]
    fn eb_gating() {
        let s = TschNodeState::new(1);
        let seq = 0;
        assert!(baseline_eb_tick(MacMode::Baseline6TischMinimal, NodeId(0), &s, Some(0), Asn(0), seq, SimTime::ZERO).is_some());
        assert!(baseline_eb_tick(MacMode::Baseline6TischMinimal, NodeId(4), &s, None, Asn(0), seq, SimTime::ZERO).is_none());
        assert!(baseline_eb_tick(MacMode::SixPp, NodeId(0), &s, Some(0), Asn(0), seq, SimTime::ZERO).is_none());
    }

    #[test]
    fn associate_once() {
        let mut s = TschNodeState::new(1);
        assert!(try_associate(&mut s, &eb(500), 0, SyncSource::Neighbor(NodeId(0)), SimTime(10)));
        assert_eq!(s.asn_estimate, Some(Asn(500)));
        assert!(!try_associate(&mut s, &eb(600), 0, SyncSource::Neighbor(NodeId(0)), SimTime(20)));
        assert_eq!(s.associated_at, Some(SimTime(10)));
        assert_eq!(s.asn_estimate, Some(Asn(600)));
        let not_eb = Frame::new(NodeId(0), NodeId(1), 0, SimTime::ZERO, FrameMeta::Ka);
        let mut fresh = TschNodeState::new(1);
        assert!(!try_associate(&mut fresh, &not_eb, 0, SyncSource::Neighbor(NodeId(0)), SimTime(0)));
        assert!(!fresh.associated);
    }

    #[test]
    fn flood_association_anchors_to_ct0() {
        let timing = CtTiming::new(PhyMode::Le2M);
        let reference = crate::ctflood::on_ct_rx(SimTime(5_000 + 4 * 320), 4, &timing).unwrap();
        let mut s = TschNodeState::new(1);
        let src = SyncSource::Flood { reference, flood_start: SimTime(5_000), micro_slot_us: 320 };
        assert!(try_associate(&mut s, &eb(7), 40_000, src, SimTime(6_280)));
        assert_eq!(s.time_source, Some(NodeId::COORDINATOR));
        // drift over four micro-slots is below one microsecond
        assert!(s.sync_error_ns(SimTime(6_280)).unwrap().abs() < 1_000);
    }

    #[test]
    fn resync_drift_examples() {
        let mut s = TschNodeState::new(1);
        s.sync = Some(SyncState { anchor: SimTime::ZERO, residual_ns: 0, relative_drift_ppb: 40_000 });
        let before = resync(&mut s, 40_000, SyncSource::Neighbor(NodeId(0)), SimTime(1_010_000));
        assert_eq!(before, 40_400);
        assert!(s.sync_error_ns(SimTime(1_010_000)).unwrap().abs() <= 1_000);

        let mut z = TschNodeState::new(1);
        z.sync = Some(SyncState { anchor: SimTime::ZERO, residual_ns: 0, relative_drift_ppb: 0 });
        assert_eq!(resync(&mut z, 0, SyncSource::Neighbor(NodeId(0)), SimTime(5_000_000)), 0);

        let st = SyncState { anchor: SimTime::ZERO, residual_ns: 0, relative_drift_ppb: 80_000 };
        assert_eq!(st.desync_time(1_000), Some(SimTime(12_500_000)));
        let neg = SyncState { relative_drift_ppb: -80_000, ..st };
        assert_eq!(neg.desync_time(1_000), Some(SimTime(12_500_000)));
        let still = SyncState { relative_drift_ppb: 0, ..st };
        assert_eq!(still.desync_time(1_000), None);
    }

    #[test]
    fn keepalive_gating() {
        let cfg = MacConfig::default();
        let mut s = TschNodeState::new(1);
        s.associated = true;
        s.time_source = Some(NodeId(3));
        s.last_sync_at = SimTime::ZERO;
        let mode = MacMode::Baseline6TischMinimal;
        assert!(keepalive_tick(mode, &cfg, NodeId(1), &s, 0, SimTime::from_secs(9)).is_none());
        let ka = keepalive_tick(mode, &cfg, NodeId(1), &s, 0, SimTime::from_secs(10)).unwrap();
        assert_eq!(ka.next_hop, NodeId(3));
        assert!(keepalive_tick(MacMode::SixPp, &cfg, NodeId(1), &s, 0, SimTime::from_secs(10)).is_none());
    }

    #[test]
    fn scan_dwells_then_moves() {
        let h = HoppingConfig::default();
        let cfg = MacConfig::default();
        assert_eq!(scan_channel(&h, &cfg, 3, SimTime(0)), 14);
        assert_eq!(scan_channel(&h, &cfg, 3, SimTime(999_999)), 14);
        assert_eq!(scan_channel(&h, &cfg, 3, SimTime(1_000_000)), 15);
    }

    #[test]
    fn clock_model() {
        let c = ClockModel::from_ppm(40.0);
        assert_eq!(c.local_ns(SimTime(1_000_000)), 1_000_040_000);
        assert!((c.drift_ppm() - 40.0).abs() < 1e-9);
    }
}
