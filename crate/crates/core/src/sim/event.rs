//! Deterministic event queue ordered by (time, kind, node, insertion).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::types::{NodeId, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimerTag {
    Eb,
    Ka,
    Dao,
    Rpl,
    Desync,
}

/// Kinds sort in processing order at equal timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    SlotBoundary,
    CtMicroSlot,
    Timer { tag: TimerTag, generation: u64 },
    AppGen,
}

impl EventKind {
    fn order(&self) -> u8 {
        match self {
            EventKind::SlotBoundary => 0,
            EventKind::CtMicroSlot => 1,
            EventKind::Timer { .. } => 2,
            EventKind::AppGen => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub at: SimTime,
    pub kind: EventKind,
    pub node: NodeId,
}

type Key = (SimTime, u8, NodeId, u64);

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(Key, EventKindOrd)>>,
    seq: u64,
    now: SimTime,
}

// BinaryHeap needs Ord on the payload; the key already totally orders events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct EventKindOrd(EventKind);

impl PartialOrd for EventKindOrd {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EventKindOrd {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// # Panics
    /// If `at` is earlier than the event currently being processed.
    pub fn schedule(&mut self, at: SimTime, kind: EventKind, node: NodeId) {
        assert!(at >= self.now, "event scheduled in the past: {at} < {}", self.now);
        self.seq += 1;
        self.heap
            .push(Reverse(((at, kind.order(), node, self.seq), EventKindOrd(kind))));
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(((at, _, node, _), EventKindOrd(kind))) = self.heap.pop()?;
        self.now = at;
        Some(Event { at, kind, node })
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(((at, ..), _))| *at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
