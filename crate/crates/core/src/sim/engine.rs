use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use crate::ctflood::{on_ct_rx, CtFloodConfig, FloodRun};
use crate::error::Result;
use crate::metrics::{Delivery, MetricsRecord};
use crate::phy::{on_air_time, CtTiming, PhyMode};
use crate::rng::{Purpose, RngStreams};
use crate::rpl::{
    adopt_parent, dao_tick, on_dao_ack, restart_dao, root_ack_6pp, root_ack_baseline, select_parent,
    RootRoutingTable, RplNodeState,
};
use crate::scenario::ScenarioConfig;
use crate::schedule::{ct_channel, slot_role, tsch_channel, SlotRole, SlotframeLayout};
use crate::topology::Topology;
use crate::tschmac::{
    baseline_eb_tick, keepalive_tick, next_eb_time, resync, scan_channel, shared_slot_contention,
    try_associate, ClockModel, ContentionAction, MacMode, QueuedFrame, SyncSource, TschNodeState,
};
use crate::types::{Asn, Frame, FrameKind, FrameMeta, NodeId, SimTime};

use super::event::{Event, EventKind, EventQueue, TimerTag};
use super::reception::ReceptionModel;
use super::{DaoRow, FloodRow, NodeSummary, RunResult, TraceRow};

/// Offset of the frame start inside a TSCH slot.
const TS_TX_OFFSET_US: u64 = 2_120;
/// PHY and MAC framing around a TSCH payload.
const MAC_OVERHEAD_BYTES: u64 = 21;

const ROOT: NodeId = NodeId::COORDINATOR;

struct ActiveFlood {
    run: FloodRun,
    asn: Asn,
}

pub(super) struct Engine<'c> {
    cfg: &'c ScenarioConfig,
    mode: MacMode,
    topo: Topology,
    hops: Vec<Option<u32>>,
    layout: SlotframeLayout,
    reception: ReceptionModel,
    timing: CtTiming,
    rng: RngStreams,
    clocks: Vec<ClockModel>,
    mac: Vec<TschNodeState>,
    rpl: Vec<RplNodeState>,
    table: RootRoutingTable,
    q: EventQueue,
    /// Bumped on every (dis)association; EB, KA and RPL timers carry it.
    epoch: Vec<u64>,
    dao_gen: Vec<u64>,
    next_dsn: Vec<u32>,
    last_dsn: Vec<BTreeMap<NodeId, u32>>,
    frame_seq: Vec<u32>,
    flood: Option<ActiveFlood>,
    flood_in_window: u32,
    flood_idx: u64,
    pending_data: VecDeque<(u32, SimTime, u32)>,
    delivery_idx: BTreeMap<(u32, NodeId), usize>,
    app_seq: u32,
    metrics: MetricsRecord,
    trace: Vec<TraceRow>,
    floods: Vec<FloodRow>,
    dao: Vec<DaoRow>,
    end: SimTime,
}

impl<'c> Engine<'c> {
    pub(super) fn new(cfg: &'c ScenarioConfig, topo: Topology) -> Result<Self> {
        let n = topo.node_count();
        let layout = cfg.layout()?;
        let hops = topo.bfs(ROOT)?;
        let mut rng = RngStreams::new(cfg.run.seed, n);
        let bound = (cfg.clock.drift_ppm * 1_000.0).round() as i64;
        let clocks = (0..n)
            .map(|i| ClockModel {
                drift_ppb: rng.get(NodeId::from(i), Purpose::Clock).random_range(-bound..=bound),
                offset_ns: 0,
            })
            .collect();
        let mut mac: Vec<_> = (0..n)
            .map(|i| {
                let mut s = TschNodeState::new(cfg.mac.min_be);
                s.scan_start_index = rng
                    .get(NodeId::from(i), Purpose::Scan)
                    .random_range(0..cfg.hopping.tsch_channels.len());
                s
            })
            .collect();
        mac[0].associated = true;
        mac[0].asn_estimate = Some(Asn(0));
        let mut rpl = vec![RplNodeState::default(); n];
        rpl[0] = RplNodeState::root();
        Ok(Engine {
            cfg,
            mode: cfg.run.mode,
            hops,
            layout,
            reception: cfg.reception_model(),
            timing: cfg.ct.timing(),
            rng,
            clocks,
            mac,
            rpl,
            table: RootRoutingTable::default(),
            q: EventQueue::new(),
            epoch: vec![0; n],
            dao_gen: vec![0; n],
            next_dsn: vec![0; n],
            last_dsn: vec![BTreeMap::new(); n],
            frame_seq: vec![0; n],
            flood: None,
            flood_in_window: 0,
            flood_idx: 0,
            pending_data: VecDeque::new(),
            delivery_idx: BTreeMap::new(),
            app_seq: 0,
            metrics: MetricsRecord::new(n),
            trace: Vec::new(),
            floods: Vec::new(),
            dao: Vec::new(),
            end: SimTime::from_secs(cfg.run.duration_s),
            topo,
        })
    }

    pub(super) fn run(mut self) -> Result<RunResult> {
        self.q.schedule(SimTime::ZERO, EventKind::SlotBoundary, ROOT);
        if self.mode.beacons_enabled() {
            self.schedule_timer(SimTime::ZERO, ROOT, TimerTag::Eb, 0);
        }
        if self.cfg.app.enabled {
            let start = SimTime::from_secs(self.cfg.app.start_s);
            if start.0 <= self.cfg.app_stop_us() {
                self.q.schedule(start, EventKind::AppGen, ROOT);
            }
        }
        while let Some(t) = self.q.peek_time() {
            if t >= self.end {
                break;
            }
            let ev = self.q.pop().expect("peeked");
            self.handle(ev)?;
        }
        Ok(self.finish())
    }

    fn handle(&mut self, ev: Event) -> Result<()> {
        match ev.kind {
            EventKind::SlotBoundary => self.on_slot(ev.at),
            EventKind::CtMicroSlot => self.on_micro_slot(ev.at)?,
            EventKind::Timer { tag, generation } => self.on_timer(ev.node, tag, generation, ev.at),
            EventKind::AppGen => self.on_app(ev.at),
        }
        Ok(())
    }

    fn log(&mut self, t: SimTime, node: NodeId, event: &'static str, detail: String) {
        self.trace.push(TraceRow { t_us: t.0, node, event, detail });
    }

    fn schedule_timer(&mut self, at: SimTime, node: NodeId, tag: TimerTag, generation: u64) {
        self.q.schedule(at, EventKind::Timer { tag, generation }, node);
    }

    fn rel_drift(&self, a: NodeId, b: NodeId) -> i64 {
        self.clocks[a.index()].drift_ppb - self.clocks[b.index()].drift_ppb
    }

    fn hops_of(&self, node: NodeId) -> u32 {
        self.hops[node.index()].unwrap_or(u32::MAX)
    }

    // ---- slots ----

    fn next_slot(&self, asn: Asn) -> Asn {
        match self.mode {
            MacMode::Baseline6TischMinimal => Asn(asn.0 + self.layout.total_slots),
            MacMode::SixPp => {
                let mut a = asn.0 + 1;
                let i = a % self.layout.total_slots;
                if i > 0 && i < self.layout.ct_reserved_slots {
                    a += self.layout.ct_reserved_slots - i;
                }
                Asn(a)
            }
        }
    }

    fn on_slot(&mut self, t: SimTime) {
        let asn = Asn(t.0 / self.layout.slot_duration_us);
        let next = self.next_slot(asn);
        self.q.schedule(self.layout.slot_start(next), EventKind::SlotBoundary, ROOT);
        match (self.mode, slot_role(&self.layout, asn)) {
            (MacMode::SixPp, SlotRole::Ct) => {
                if self.layout.slot_index(asn) == 0 && self.layout.has_ct() {
                    self.flood_in_window = 0;
                    self.q.schedule(t, EventKind::CtMicroSlot, ROOT);
                }
            }
            _ => self.shared_slot(t, asn),
        }
    }

    // ---- CT plane ----

    fn flood_content(&mut self, asn: Asn, now: SimTime) -> Frame {
        let seq = self.flood_idx as u32;
        let (meta, born) = if let Some(front) = self.pending_data.front_mut() {
            let out = (FrameMeta::Data { app_seq: front.0 }, front.1);
            front.2 -= 1;
            if front.2 == 0 {
                self.pending_data.pop_front();
            }
            out
        } else if !self.table.pending_acks.is_empty() {
            let acked = root_ack_6pp(&mut self.table, self.timing.payload_bytes);
            (FrameMeta::DaoAck { acked }, now)
        } else {
            (FrameMeta::Eb { asn, rank: Some(0) }, now)
        };
        Frame::new(ROOT, NodeId::BROADCAST, seq, born, meta).with_payload_bytes(self.timing.payload_bytes as u16)
    }

    fn on_micro_slot(&mut self, t: SimTime) -> Result<()> {
        let mut af = match self.flood.take() {
            Some(af) => af,
            None => {
                let asn = Asn(t.0 / self.layout.slot_duration_us);
                let frame = self.flood_content(asn, t);
                let cfg = CtFloodConfig { n_tx: self.cfg.ct.n_tx, n_h: self.cfg.ct.n_h, timing: self.timing, initiator: ROOT };
                let ch = ct_channel(&self.cfg.hopping, self.flood_idx);
                self.metrics.control.floods += 1;
                ActiveFlood { run: FloodRun::new(cfg, ch, t, self.topo.node_count(), frame), asn }
            }
        };
        let m = af.run.next_micro_slot();
        let ch = af.run.channel;
        let (rng, reception, topo) = (&mut self.rng, &self.reception, &self.topo);
        let decoded = af.run.step(topo, |rx, heard, _| {
            let u: f64 = rng.get(rx, Purpose::Flood).random();
            let frames: Vec<&Frame> = heard.iter().map(|h| h.frame).collect();
            let prrs: Vec<f64> = heard.iter().map(|h| topo.prr(h.node, rx, ch)).collect();
            reception.resolve_ct(rx, &frames, &prrs, ch, t, u)
        })?;
        for node in decoded {
            self.on_flood_rx(node, &af, m, t)?;
        }
        let slot_us = af.run.cfg.micro_slot_us();
        if af.run.is_done() {
            self.finish_flood(&af)?;
            self.flood_idx += 1;
            self.flood_in_window += 1;
            if self.flood_in_window < self.cfg.ct.floods_per_frame {
                self.q.schedule(t + slot_us, EventKind::CtMicroSlot, ROOT);
            }
        } else {
            self.flood = Some(af);
            self.q.schedule(t + slot_us, EventKind::CtMicroSlot, ROOT);
        }
        Ok(())
    }

    fn finish_flood(&mut self, af: &ActiveFlood) -> Result<()> {
        let outcome = af.run.outcome()?;
        let reached = outcome.iter().filter(|o| o.reached).count();
        let kind = af.run.states[0].frame.as_ref().map_or("EB", |f| f.kind.as_str());
        self.log(
            af.run.start,
            ROOT,
            "flood",
            format!("idx={} ch={} content={} reached={}", self.flood_idx, af.run.channel, kind, reached),
        );
        if self.cfg.run.flood_trace {
            for o in outcome {
                self.floods.push(FloodRow {
                    flood_idx: self.flood_idx,
                    node: o.node,
                    reached: o.reached,
                    first_rx_uslot: o.first_rx_micro_slot,
                    relay_cnt: o.relay_cnt,
                });
            }
        }
        Ok(())
    }

    fn on_flood_rx(&mut self, node: NodeId, af: &ActiveFlood, m: u32, rx_start: SimTime) -> Result<()> {
        let state = &af.run.states[node.index()];
        let relay = state.relay_cnt_at_rx;
        let frame = state.frame.clone().expect("decoded node holds the frame");
        let reference = on_ct_rx(rx_start, relay, &self.timing)?;
        let source = SyncSource::Flood {
            reference,
            flood_start: af.run.start,
            micro_slot_us: af.run.cfg.micro_slot_us(),
        };
        let drift = self.rel_drift(node, ROOT);
        let i = node.index();
        if !self.mac[i].associated {
            let eb = Frame::new(ROOT, NodeId::BROADCAST, 0, rx_start, FrameMeta::Eb { asn: af.asn, rank: Some(0) });
            if try_associate(&mut self.mac[i], &eb, drift, source, rx_start) {
                self.joined(node, rx_start, format!("flood relay={relay} uslot={m}"));
            }
            self.arm_desync(node, rx_start);
        } else if self.cfg.clock.resync {
            resync(&mut self.mac[i], drift, source, rx_start);
            self.arm_desync(node, rx_start);
        }
        let done = rx_start + af.run.cfg.micro_slot_us();
        match &frame.meta {
            FrameMeta::Data { app_seq } => self.deliver(*app_seq, node, done),
            FrameMeta::DaoAck { acked } => {
                if let Some(&(_, seq)) = acked.iter().find(|(n, _)| *n == node) {
                    self.ack_received(node, seq, done);
                }
            }
            _ => {}
        }
        Ok(())
    }

    // ---- clock ----

    fn arm_desync(&mut self, node: NodeId, now: SimTime) {
        let s = &self.mac[node.index()];
        if let Some(at) = s.sync.and_then(|sy| sy.desync_time(self.cfg.mac.guard_us)) {
            let generation = s.sync_generation;
            self.schedule_timer(at.max(now), node, TimerTag::Desync, generation);
        }
    }

    /// Neighbor-based resync. Only the baseline keeps time through neighbors;
    /// 6PP nodes follow the coordinator's floods alone.
    fn resync_from(&mut self, node: NodeId, source: NodeId, now: SimTime) {
        if !self.mode.beacons_enabled() || !self.cfg.clock.resync {
            return;
        }
        let drift = self.rel_drift(node, source);
        resync(&mut self.mac[node.index()], drift, SyncSource::Neighbor(source), now);
        self.arm_desync(node, now);
    }

    fn desync(&mut self, node: NodeId, now: SimTime) {
        let i = node.index();
        let guard_ns = self.cfg.mac.guard_us as i64 * 1_000;
        let s = &mut self.mac[i];
        s.max_sync_error_ns = s.max_sync_error_ns.max(guard_ns);
        s.disassociate(&self.cfg.mac);
        let r = &mut self.rpl[i];
        r.parent = None;
        r.rank = None;
        restart_dao(r);
        self.epoch[i] += 1;
        self.dao_gen[i] += 1;
        self.log(now, node, "desync", String::new());
    }

    // ---- association and routing ----

    fn neighbor_ranks(&self, node: NodeId) -> Vec<(NodeId, u16)> {
        self.topo
            .neighbors(node)
            .filter(|nb| self.mac[nb.index()].associated)
            .filter_map(|nb| self.rpl[nb.index()].rank.map(|r| (nb, r)))
            .collect()
    }

    fn joined(&mut self, node: NodeId, now: SimTime, how: String) {
        let i = node.index();
        if self.metrics.record_association(node, now.0) {
            self.log(now, node, "assoc", how);
        } else {
            self.log(now, node, "reassoc", how);
        }
        self.epoch[i] += 1;
        let epoch = self.epoch[i];
        let choice = select_parent(&self.neighbor_ranks(node));
        adopt_parent(&mut self.rpl[i], choice);
        if let Some(p) = self.rpl[i].parent {
            self.on_new_parent(node, p, now);
        }
        let rpl_at = now + self.cfg.rpl.parent_check_ms * 1_000;
        self.schedule_timer(rpl_at, node, TimerTag::Rpl, epoch);
        if self.mode.beacons_enabled() {
            let first_eb = self.rng.get(node, Purpose::Beacon).random_range(0..self.cfg.mac.eb_period_ms * 1_000);
            self.schedule_timer(now + first_eb, node, TimerTag::Eb, epoch);
            self.schedule_timer(now + self.cfg.mac.ka_period_ms * 1_000, node, TimerTag::Ka, epoch);
        }
    }

    fn on_new_parent(&mut self, node: NodeId, parent: NodeId, now: SimTime) {
        let i = node.index();
        self.log(now, node, "parent", format!("parent={parent} rank={}", self.rpl[i].rank.unwrap_or(0)));
        if self.mode.beacons_enabled() && self.mac[i].time_source != Some(parent) {
            self.mac[i].time_source = Some(parent);
            self.resync_from(node, parent, now);
        }
        restart_dao(&mut self.rpl[i]);
        self.dao_gen[i] += 1;
        let delay = self.rng.get(node, Purpose::Routing).random_range(0..self.cfg.rpl.dao_delay_ms.max(1) * 1_000);
        self.schedule_timer(now + delay, node, TimerTag::Dao, self.dao_gen[i]);
    }

    fn rpl_tick(&mut self, node: NodeId, now: SimTime) {
        let i = node.index();
        let ranks = self.neighbor_ranks(node);
        let current = self.rpl[i].parent.and_then(|p| ranks.iter().find(|(n, _)| *n == p).copied());
        let best = select_parent(&ranks);
        let choice = match (current, best) {
            (Some(c), Some(b)) if b.1 < c.1 => Some(b),
            (Some(c), _) => Some(c),
            (None, b) => b,
        };
        let before = self.rpl[i].parent;
        adopt_parent(&mut self.rpl[i], choice);
        match self.rpl[i].parent {
            Some(p) if before != Some(p) => self.on_new_parent(node, p, now),
            _ => {}
        }
        let at = now + self.cfg.rpl.parent_check_ms * 1_000;
        self.schedule_timer(at, node, TimerTag::Rpl, self.epoch[i]);
    }

    fn dao_timer(&mut self, node: NodeId, now: SimTime) {
        let i = node.index();
        if !self.mac[i].associated {
            return;
        }
        let Some(send) = dao_tick(&self.cfg.rpl, node, &mut self.rpl[i], now) else {
            return;
        };
        let event = if send.retransmission { "dao_retx" } else { "dao_tx" };
        let hops = self.hops_of(node);
        self.dao.push(DaoRow { node, event, t_us: now.0, hops });
        self.log(now, node, event, format!("seq={} parent={}", send.frame.seq, send.parent));
        self.enqueue(node, QueuedFrame::unicast(send.frame, send.parent, Vec::new()), now);
        self.schedule_timer(send.timeout, node, TimerTag::Dao, self.dao_gen[i]);
    }

    fn ack_received(&mut self, node: NodeId, seq: u32, now: SimTime) {
        let i = node.index();
        let hops = self.hops_of(node);
        if on_dao_ack(&mut self.rpl[i], seq, hops.min(u16::MAX as u32) as u16, now) {
            if let Some(first) = self.rpl[i].first_dao_at {
                self.metrics.record_dao_delta(node, now.since(first));
            }
            self.dao.push(DaoRow { node, event: "dao_ack_rx", t_us: now.0, hops });
            self.log(now, node, "dao_ack_rx", format!("seq={seq}"));
        }
    }

    // ---- timers and application ----

    fn on_timer(&mut self, node: NodeId, tag: TimerTag, generation: u64, now: SimTime) {
        let i = node.index();
        match tag {
            TimerTag::Desync => {
                let s = &self.mac[i];
                if s.associated && s.sync_generation == generation && node != ROOT {
                    self.desync(node, now);
                }
            }
            TimerTag::Dao => {
                if generation == self.dao_gen[i] {
                    self.dao_timer(node, now);
                }
            }
            _ if generation != self.epoch[i] || !self.mac[i].associated => {}
            TimerTag::Rpl => self.rpl_tick(node, now),
            TimerTag::Eb => {
                if !self.mac[i].has_queued(FrameKind::Eb) {
                    let asn = Asn(now.0 / self.layout.slot_duration_us);
                    let seq = self.bump_seq(node);
                    if let Some(eb) = baseline_eb_tick(self.mode, node, &self.mac[i], self.rpl[i].rank, asn, seq, now) {
                        self.enqueue(node, QueuedFrame::broadcast(eb), now);
                    }
                }
                let next = next_eb_time(&self.cfg.mac, now, self.rng.get(node, Purpose::Beacon));
                self.schedule_timer(next, node, TimerTag::Eb, generation);
            }
            TimerTag::Ka => {
                let seq = self.bump_seq(node);
                let period = self.cfg.mac.ka_period_ms * 1_000;
                let next = match keepalive_tick(self.mode, &self.cfg.mac, node, &self.mac[i], seq, now) {
                    Some(ka) => {
                        self.enqueue(node, ka, now);
                        now + period
                    }
                    None => (self.mac[i].last_sync_at + period).max(now + 1),
                };
                self.schedule_timer(next, node, TimerTag::Ka, generation);
            }
        }
    }

    fn bump_seq(&mut self, node: NodeId) -> u32 {
        let s = &mut self.frame_seq[node.index()];
        *s += 1;
        *s
    }

    fn on_app(&mut self, now: SimTime) {
        let seq = self.app_seq;
        self.app_seq += 1;
        self.log(now, ROOT, "data_gen", format!("seq={seq}"));
        for dest in self.topo.nodes().filter(|&d| d != ROOT) {
            self.delivery_idx.insert((seq, dest), self.metrics.deliveries.len());
            self.metrics.deliveries.push(Delivery { app_seq: seq, dest, generated_at: now, delivered_at: None });
            if self.mode == MacMode::Baseline6TischMinimal {
                match self.table.downward_route(dest) {
                    Some(route) => {
                        let f = Frame::new(ROOT, dest, seq, now, FrameMeta::Data { app_seq: seq });
                        self.enqueue(ROOT, QueuedFrame::unicast(f, route[0], route[1..].to_vec()), now);
                    }
                    None => self.log(now, dest, "no_route", format!("seq={seq}")),
                }
            }
        }
        if self.mode == MacMode::SixPp {
            self.pending_data.push_back((seq, now, self.cfg.ct.data_repeats));
        }
        let next = now + self.cfg.app.period_ms * 1_000;
        if next.0 <= self.cfg.app_stop_us() {
            self.q.schedule(next, EventKind::AppGen, ROOT);
        }
    }

    fn deliver(&mut self, app_seq: u32, node: NodeId, at: SimTime) {
        if let Some(&k) = self.delivery_idx.get(&(app_seq, node)) {
            let d = &mut self.metrics.deliveries[k];
            if d.delivered_at.is_none() {
                d.delivered_at = Some(at);
                self.log(at, node, "data_rx", format!("seq={app_seq}"));
            }
        }
    }

    // ---- TSCH plane ----

    fn enqueue(&mut self, node: NodeId, mut qf: QueuedFrame, now: SimTime) {
        let i = node.index();
        qf.dsn = self.next_dsn[i];
        self.next_dsn[i] = self.next_dsn[i].wrapping_add(1);
        let kind = qf.frame.kind;
        if !self.mac[i].enqueue(&self.cfg.mac, qf) {
            self.log(now, node, "queue_full", kind.as_str().into());
        }
    }

    fn shared_slot(&mut self, t: SimTime, asn: Asn) {
        let actions = shared_slot_contention(&mut self.mac);
        let txs: Vec<NodeId> = (0..actions.len())
            .filter(|&i| actions[i] == ContentionAction::Tx)
            .map(NodeId::from)
            .collect();
        if txs.is_empty() {
            return;
        }
        let ch = tsch_channel(&self.cfg.hopping, asn);
        for &j in &txs {
            let kind = self.mac[j.index()].tx_queue[0].frame.kind;
            self.metrics.control.count(kind);
        }
        let mut decoded = Vec::new();
        for r in self.topo.nodes() {
            let ri = r.index();
            if actions[ri] == ContentionAction::Tx {
                continue;
            }
            let listen = if self.mac[ri].associated {
                ch
            } else if self.mode.beacons_enabled() {
                scan_channel(&self.cfg.hopping, &self.cfg.mac, self.mac[ri].scan_start_index, t)
            } else {
                continue;
            };
            if listen != ch {
                continue;
            }
            let (cands, prrs): (Vec<NodeId>, Vec<f64>) = txs
                .iter()
                .map(|&j| (j, self.topo.prr(j, r, ch)))
                .filter(|&(_, p)| p > 0.0)
                .unzip();
            if cands.is_empty() {
                continue;
            }
            let rng = &mut self.rng;
            if let Some(k) = self.reception.resolve_tsch(&prrs, ch, t, || rng.get(r, Purpose::Reception).random()) {
                decoded.push((r, cands[k]));
            }
        }
        let mut acked = vec![false; self.topo.node_count()];
        for (r, j) in decoded {
            let qf = self.mac[j.index()].tx_queue[0].clone();
            let bytes = qf.frame.payload_bytes as u64 + MAC_OVERHEAD_BYTES;
            let rx_at = t + TS_TX_OFFSET_US + on_air_time(PhyMode::Ieee802154, bytes);
            if qf.next_hop.is_broadcast() {
                if !self.mac[r.index()].associated {
                    self.on_eb(r, j, &qf.frame, rx_at);
                }
                continue;
            }
            if qf.next_hop != r {
                continue;
            }
            let ack_p = self.topo.prr(r, j, ch) * self.reception.jam_factor(ch, t);
            let ack_ok = self.rng.get(j, Purpose::Ack).random::<f64>() < ack_p;
            acked[j.index()] = ack_ok;
            let dup = self.last_dsn[r.index()].insert(j, qf.dsn) == Some(qf.dsn);
            if self.mac[r.index()].time_source == Some(j) {
                self.resync_from(r, j, rx_at);
            }
            if !dup {
                self.on_unicast(r, qf, rx_at);
            }
            if ack_ok && self.mac[j.index()].time_source == Some(r) {
                self.resync_from(j, r, rx_at);
            }
        }
        for j in txs {
            let i = j.index();
            let rng = self.rng.get(j, Purpose::Backoff);
            if let Some((qf, false)) = self.mac[i].on_tx_result(&self.cfg.mac, acked[i], rng) {
                self.log(t, j, "drop", format!("kind={} dst={}", qf.frame.kind, qf.frame.dst));
            }
        }
    }

    fn on_eb(&mut self, r: NodeId, j: NodeId, frame: &Frame, at: SimTime) {
        let drift = self.rel_drift(r, j);
        if try_associate(&mut self.mac[r.index()], frame, drift, SyncSource::Neighbor(j), at) {
            self.arm_desync(r, at);
            self.joined(r, at, format!("eb from={j}"));
        }
    }

    fn on_unicast(&mut self, r: NodeId, qf: QueuedFrame, at: SimTime) {
        let QueuedFrame { mut frame, route, .. } = qf;
        match &mut frame.meta {
            FrameMeta::Ka | FrameMeta::Eb { .. } => {}
            FrameMeta::Dao { dao_seq, path } if r == ROOT => {
                let (seq, origin) = (*dao_seq, path[0]);
                self.log(at, origin, "dao_rx_root", format!("seq={seq} hops={}", path.len()));
                match self.mode {
                    MacMode::Baseline6TischMinimal => {
                        if let Some((ack, down)) = root_ack_baseline(&mut self.table, &frame, at) {
                            self.enqueue(ROOT, QueuedFrame::unicast(ack, down[0], down[1..].to_vec()), at);
                        }
                    }
                    MacMode::SixPp => {
                        self.table.record_dao(path);
                        self.table.queue_ack(origin, seq);
                    }
                }
            }
            FrameMeta::Dao { path, .. } => {
                let parent = self.rpl[r.index()].parent;
                match parent {
                    Some(p) if !path.contains(&r) => {
                        path.push(r);
                        frame.payload_bytes += 2;
                        self.enqueue(r, QueuedFrame::unicast(frame, p, Vec::new()), at);
                    }
                    _ => self.log(at, r, "drop", "kind=DAO no parent".into()),
                }
            }
            FrameMeta::DaoAck { acked } if frame.dst == r => {
                if let Some(&(_, seq)) = acked.iter().find(|(n, _)| *n == r) {
                    self.ack_received(r, seq, at);
                }
            }
            FrameMeta::Data { app_seq } if frame.dst == r => {
                let s = *app_seq;
                self.deliver(s, r, at);
            }
            FrameMeta::DaoAck { .. } | FrameMeta::Data { .. } => match route.split_first() {
                Some((&next, rest)) => {
                    let rest = rest.to_vec();
                    self.enqueue(r, QueuedFrame::unicast(frame, next, rest), at);
                }
                None => self.log(at, r, "drop", format!("kind={} no route", frame.kind)),
            },
        }
    }

    // ---- results ----

    fn finish(mut self) -> RunResult {
        let end = self.end;
        for s in &mut self.mac {
            if let Some(e) = s.sync_error_ns(end) {
                s.max_sync_error_ns = s.max_sync_error_ns.max(e.abs());
            }
        }
        let nodes = self
            .topo
            .nodes()
            .map(|node| {
                let i = node.index();
                let mine = self.metrics.deliveries.iter().filter(|d| d.dest == node);
                let (delivered, lost) = mine.fold((0, 0), |(a, b), d| {
                    if d.delivered_at.is_some() {
                        (a + 1, b)
                    } else {
                        (a, b + 1)
                    }
                });
                NodeSummary {
                    node,
                    hops: self.hops[i],
                    drift_ppb: self.clocks[i].drift_ppb,
                    association_latency_us: self.metrics.association_latency_us[i],
                    dao_delta_us: self.metrics.dao_delta_us[i],
                    delivered,
                    lost,
                    max_sync_error_ns: self.mac[i].max_sync_error_ns,
                    desyncs: self.mac[i].desync_count,
                    parent: self.rpl[i].parent,
                    rank: self.rpl[i].rank,
                }
            })
            .collect();
        RunResult {
            config: self.cfg.clone(),
            seed: self.cfg.run.seed,
            trace: self.trace,
            floods: self.floods,
            dao: self.dao,
            nodes,
            metrics: self.metrics,
        }
    }
}
