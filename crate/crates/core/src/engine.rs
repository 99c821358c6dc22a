//! Discrete-event engine.
//!
//! One owner advances the clock. Events are totally ordered by
//! `(fire_time, sequence)`, where `sequence` is a counter assigned at
//! scheduling time, so events sharing a fire time run in FIFO order.
//!
//! The engine also owns the [`LinkTable`]: messages sent over a link become
//! ordinary events delivered after the link's latency, or are dropped and
//! counted while the link is severed.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

/// Identifier of a simulated node (global controller, farmlet, worker, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Cancellation handle returned by [`Engine::schedule`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn sequence(self) -> u64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Data,
    Control,
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkKind::Data => "data",
            LinkKind::Control => "control",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkKey {
    pub source: NodeId,
    pub dest: NodeId,
    pub kind: LinkKind,
}

impl LinkKey {
    pub const fn new(source: NodeId, dest: NodeId, kind: LinkKind) -> Self {
        LinkKey { source, dest, kind }
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}:{}", self.source, self.dest, self.kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatus {
    Up,
    Severed,
}

impl fmt::Display for LinkStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkStatus::Up => "up",
            LinkStatus::Severed => "severed",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot schedule at {requested} before the current clock {now}")]
    ScheduleInPast { requested: SimTime, now: SimTime },
    #[error("cannot run backwards to {requested} from {now}")]
    RunInPast { requested: SimTime, now: SimTime },
    #[error("unknown link {0}")]
    UnknownLink(LinkKey),
    #[error("link {0} declared twice")]
    DuplicateLink(LinkKey),
}

/// Per-link state and message counters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinkEntry {
    pub status: LinkStatus,
    pub latency: SimTime,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl LinkEntry {
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.dropped
    }
}

/// Topology-declared links and their status.
#[derive(Clone, Debug, Default)]
pub struct LinkTable {
    entries: BTreeMap<LinkKey, LinkEntry>,
}

impl LinkTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, key: LinkKey, latency: SimTime) -> Result<(), SimError> {
        if self.entries.contains_key(&key) {
            return Err(SimError::DuplicateLink(key));
        }
        self.entries.insert(
            key,
            LinkEntry {
                status: LinkStatus::Up,
                latency,
                sent: 0,
                delivered: 0,
                dropped: 0,
            },
        );
        Ok(())
    }

    pub fn get(&self, key: &LinkKey) -> Option<&LinkEntry> {
        self.entries.get(key)
    }

    pub fn status(&self, key: &LinkKey) -> Result<LinkStatus, SimError> {
        self.entries
            .get(key)
            .map(|e| e.status)
            .ok_or(SimError::UnknownLink(*key))
    }

    pub fn drop_count(&self, key: &LinkKey) -> Result<u64, SimError> {
        self.entries
            .get(key)
            .map(|e| e.dropped)
            .ok_or(SimError::UnknownLink(*key))
    }

    /// Idempotent.
    pub fn sever(&mut self, key: &LinkKey) -> Result<LinkStatus, SimError> {
        self.set_status(key, LinkStatus::Severed)
    }

    /// Idempotent.
    pub fn restore(&mut self, key: &LinkKey) -> Result<LinkStatus, SimError> {
        self.set_status(key, LinkStatus::Up)
    }

    fn set_status(&mut self, key: &LinkKey, status: LinkStatus) -> Result<LinkStatus, SimError> {
        let entry = self.entries.get_mut(key).ok_or(SimError::UnknownLink(*key))?;
        entry.status = status;
        Ok(status)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LinkKey, &LinkEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Outcome of [`Engine::send`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SendOutcome {
    Delivered { handle: EventHandle, at: SimTime },
    Dropped,
}

/// Human-readable tag used in trace records.
pub trait EventKind {
    fn kind(&self) -> &'static str;
}

/// A dequeued event.
#[derive(Clone, Debug)]
pub struct SimEvent<P> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub target: NodeId,
    pub payload: P,
    /// Link the event arrived over, for message deliveries.
    pub via: Option<LinkKey>,
}

/// One line of the execution trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    /// Virtual seconds.
    pub t: f64,
    pub seq: u64,
    pub target: u32,
    pub kind: &'static str,
}

struct Entry<P> {
    fire_time: SimTime,
    sequence: u64,
    target: NodeId,
    payload: P,
    via: Option<LinkKey>,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.sequence == other.sequence
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_time, other.sequence).cmp(&(self.fire_time, self.sequence))
    }
}

/// Events removed from the queue by [`Engine::freeze`], awaiting [`Engine::thaw`].
pub struct FrozenEvents<P> {
    entries: Vec<Entry<P>>,
}

impl<P> FrozenEvents<P> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn payloads(&self) -> impl Iterator<Item = &P> {
        self.entries.iter().map(|e| &e.payload)
    }
}

/// The event engine.
pub struct Engine<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Entry<P>>,
    live: BTreeSet<u64>,
    links: LinkTable,
    trace: Vec<TraceRecord>,
    tracing: bool,
    executed: u64,
}

impl<P: EventKind> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: EventKind> Engine<P> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            live: BTreeSet::new(),
            links: LinkTable::new(),
            trace: Vec::new(),
            tracing: true,
            executed: 0,
        }
    }

    pub fn with_links(links: LinkTable) -> Self {
        let mut e = Self::new();
        e.links = links;
        e
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events executed so far.
    pub fn executed(&self) -> u64 {
        self.executed
    }

    /// Number of scheduled, not-yet-cancelled events.
    pub fn pending(&self) -> usize {
        self.live.len()
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn links(&self) -> &LinkTable {
        &self.links
    }

    pub fn links_mut(&mut self) -> &mut LinkTable {
        &mut self.links
    }

    pub fn schedule(&mut self, fire_time: SimTime, target: NodeId, payload: P) -> Result<EventHandle, SimError> {
        if fire_time < self.now {
            return Err(SimError::ScheduleInPast {
                requested: fire_time,
                now: self.now,
            });
        }
        Ok(self.push(fire_time, target, payload, None))
    }

    /// Schedules `delay` after the current clock; never fails.
    pub fn schedule_in(&mut self, delay: SimTime, target: NodeId, payload: P) -> EventHandle {
        let at = self.now + delay;
        self.push(at, target, payload, None)
    }

    fn push(&mut self, fire_time: SimTime, target: NodeId, payload: P, via: Option<LinkKey>) -> EventHandle {
        let sequence = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Entry {
            fire_time,
            sequence,
            target,
            payload,
            via,
        });
        self.live.insert(sequence);
        EventHandle(sequence)
    }

    /// Returns `true` if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.live.contains(&handle.0)
    }

    /// Sends `payload` from `source` to `dest` over the declared link.
    pub fn send(&mut self, payload: P, source: NodeId, dest: NodeId, kind: LinkKind) -> Result<SendOutcome, SimError> {
        let key = LinkKey::new(source, dest, kind);
        let entry = self.links.entries.get_mut(&key).ok_or(SimError::UnknownLink(key))?;
        entry.sent += 1;
        match entry.status {
            LinkStatus::Severed => {
                entry.dropped += 1;
                Ok(SendOutcome::Dropped)
            }
            LinkStatus::Up => {
                let at = self.now + entry.latency;
                let handle = self.push(at, dest, payload, Some(key));
                Ok(SendOutcome::Delivered { handle, at })
            }
        }
    }

    /// Payloads of all live pending events, in no particular order.
    pub fn pending_payloads(&self) -> impl Iterator<Item = &P> {
        self.queue
            .iter()
            .filter(|e| self.live.contains(&e.sequence))
            .map(|e| &e.payload)
    }

    /// Time of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.discard_cancelled();
        self.queue.peek().map(|e| e.fire_time)
    }

    fn discard_cancelled(&mut self) {
        while let Some(top) = self.queue.peek() {
            if self.live.contains(&top.sequence) {
                break;
            }
            self.queue.pop();
        }
    }

    /// Dequeues the next event with `fire_time <= t_end`, advancing the clock to it.
    pub fn pop_next(&mut self, t_end: SimTime) -> Option<SimEvent<P>> {
        self.discard_cancelled();
        if self.queue.peek()?.fire_time > t_end {
            return None;
        }
        let e = self.queue.pop()?;
        self.live.remove(&e.sequence);
        debug_assert!(e.fire_time >= self.now);
        self.now = e.fire_time;
        self.executed += 1;
        if let Some(key) = e.via {
            if let Some(link) = self.links.entries.get_mut(&key) {
                link.delivered += 1;
            }
        }
        if self.tracing {
            self.trace.push(TraceRecord {
                t: e.fire_time.as_secs_f64(),
                seq: e.sequence,
                target: e.target.0,
                kind: e.payload.kind(),
            });
        }
        Some(SimEvent {
            fire_time: e.fire_time,
            sequence: e.sequence,
            target: e.target,
            payload: e.payload,
            via: e.via,
        })
    }

    /// Moves the clock forward without executing anything. Callers must have
    /// drained every event at or before `t_end` first.
    pub fn advance_to(&mut self, t_end: SimTime) -> Result<(), SimError> {
        if t_end < self.now {
            return Err(SimError::RunInPast {
                requested: t_end,
                now: self.now,
            });
        }
        self.now = t_end;
        Ok(())
    }

    /// Executes every event with `fire_time <= t_end` through `handler`, then
    /// sets the clock to `t_end`. Returns the number of events executed.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<u64, SimError>
    where
        F: FnMut(&mut Engine<P>, SimEvent<P>),
    {
        if t_end < self.now {
            return Err(SimError::RunInPast {
                requested: t_end,
                now: self.now,
            });
        }
        let mut n = 0;
        while let Some(ev) = self.pop_next(t_end) {
            handler(self, ev);
            n += 1;
        }
        self.now = t_end;
        Ok(n)
    }

    /// Trace records accumulated since the last call.
    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        core::mem::take(&mut self.trace)
    }

    /// Removes every pending event matching `select` from the queue.
    pub fn freeze<F>(&mut self, mut select: F) -> FrozenEvents<P>
    where
        F: FnMut(&P) -> bool,
    {
        let mut kept = BinaryHeap::with_capacity(self.queue.len());
        let mut frozen = Vec::new();
        for e in core::mem::take(&mut self.queue).into_vec() {
            if !self.live.contains(&e.sequence) {
                continue;
            }
            if select(&e.payload) {
                frozen.push(e);
            } else {
                kept.push(e);
            }
        }
        self.queue = kept;
        FrozenEvents { entries: frozen }
    }

    /// Re-queues frozen events shifted by `delay`, keeping their sequence
    /// numbers so their relative order is unchanged.
    pub fn thaw(&mut self, frozen: FrozenEvents<P>, delay: SimTime) {
        for mut e in frozen.entries {
            if !self.live.contains(&e.sequence) {
                continue;
            }
            e.fire_time += delay;
            if e.fire_time < self.now {
                e.fire_time = self.now;
            }
            self.queue.push(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[derive(Clone, Debug, PartialEq)]
    struct Tag(u32);

    impl EventKind for Tag {
        fn kind(&self) -> &'static str {
            "tag"
        }
    }

    fn t(ms: u64) -> SimTime {
        SimTime::from_millis(ms)
    }

    #[test]
    fn event_at_now_fires_before_later_ones() {
        let mut e: Engine<Tag> = Engine::new();
        e.schedule(t(5), NodeId(0), Tag(1)).unwrap();
        e.schedule(t(0), NodeId(0), Tag(0)).unwrap();
        let first = e.pop_next(SimTime::MAX).unwrap();
        assert_eq!(first.payload, Tag(0));
    }

    #[test]
    fn equal_fire_times_dequeue_in_scheduling_order() {
        let mut e: Engine<Tag> = Engine::new();
        for i in 0..5 {
            e.schedule(t(3), NodeId(0), Tag(i)).unwrap();
        }
        let order: Vec<u32> = core::iter::from_fn(|| e.pop_next(SimTime::MAX)).map(|ev| ev.payload.0).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut e: Engine<Tag> = Engine::new();
        e.advance_to(t(10)).unwrap();
        assert!(matches!(
            e.schedule(t(9), NodeId(0), Tag(0)),
            Err(SimError::ScheduleInPast { .. })
        ));
    }

    #[test]
    fn empty_queue_run_advances_clock_with_empty_trace() {
        let mut e: Engine<Tag> = Engine::new();
        let n = e.run_until(SimTime::from_secs(5), |_, _| {}).unwrap();
        assert_eq!(n, 0);
        assert_eq!(e.now(), SimTime::from_secs(5));
        assert!(e.take_trace().is_empty());
    }

    #[test]
    fn cancelled_events_never_fire_or_trace() {
        let mut e: Engine<Tag> = Engine::new();
        let h = e.schedule(t(1), NodeId(0), Tag(1)).unwrap();
        e.schedule(t(2), NodeId(0), Tag(2)).unwrap();
        assert!(e.cancel(h));
        assert!(!e.cancel(h));
        let mut seen = vec![];
        e.run_until(t(10), |_, ev| seen.push(ev.payload.0)).unwrap();
        assert_eq!(seen, vec![2]);
        assert_eq!(e.take_trace().len(), 1);
    }

    #[test]
    fn handler_scheduling_never_executes_early() {
        let mut e: Engine<Tag> = Engine::new();
        e.schedule(t(1), NodeId(0), Tag(0)).unwrap();
        e.run_until(t(100), |eng, ev| {
            if ev.payload.0 < 20 {
                let d = t(u64::from(ev.payload.0 % 3));
                eng.schedule_in(d, NodeId(1), Tag(ev.payload.0 + 1));
                eng.schedule_in(t(2), NodeId(1), Tag(ev.payload.0 + 2));
            }
        })
        .unwrap();
        let trace = e.take_trace();
        assert!(trace.len() > 20);
        assert!(trace.windows(2).all(|w| w[0].t <= w[1].t));
    }

    fn linked() -> (Engine<Tag>, LinkKey) {
        let key = LinkKey::new(NodeId(0), NodeId(1), LinkKind::Data);
        let mut links = LinkTable::new();
        links.declare(key, SimTime::from_millis(1)).unwrap();
        (Engine::with_links(links), key)
    }

    #[test]
    fn send_over_up_link_delivers_after_latency() {
        let (mut e, _) = linked();
        e.advance_to(t(10)).unwrap();
        match e.send(Tag(1), NodeId(0), NodeId(1), LinkKind::Data).unwrap() {
            SendOutcome::Delivered { at, .. } => assert_eq!(at, t(11)),
            SendOutcome::Dropped => panic!("dropped"),
        }
    }

    #[test]
    fn send_over_severed_link_drops_and_counts() {
        let (mut e, key) = linked();
        e.links_mut().sever(&key).unwrap();
        assert_eq!(
            e.send(Tag(1), NodeId(0), NodeId(1), LinkKind::Data).unwrap(),
            SendOutcome::Dropped
        );
        assert_eq!(e.links().drop_count(&key).unwrap(), 1);
        assert_eq!(e.pending(), 0);
    }

    #[test]
    fn sever_is_idempotent_and_restore_resumes_delivery() {
        let (mut e, key) = linked();
        assert_eq!(e.links_mut().sever(&key).unwrap(), LinkStatus::Severed);
        assert_eq!(e.links_mut().sever(&key).unwrap(), LinkStatus::Severed);
        assert_eq!(e.links_mut().restore(&key).unwrap(), LinkStatus::Up);
        assert!(matches!(
            e.send(Tag(1), NodeId(0), NodeId(1), LinkKind::Data).unwrap(),
            SendOutcome::Delivered { .. }
        ));
    }

    #[test]
    fn unknown_link_is_an_error() {
        let (mut e, _) = linked();
        let bogus = LinkKey::new(NodeId(1), NodeId(0), LinkKind::Data);
        assert_eq!(
            e.send(Tag(0), NodeId(1), NodeId(0), LinkKind::Data),
            Err(SimError::UnknownLink(bogus))
        );
        assert_eq!(e.links_mut().sever(&bogus), Err(SimError::UnknownLink(bogus)));
    }

    #[test]
    fn link_conservation_holds_at_snapshots() {
        let (mut e, key) = linked();
        for i in 0..50u32 {
            if i == 20 {
                e.links_mut().sever(&key).unwrap();
            }
            if i == 30 {
                e.links_mut().restore(&key).unwrap();
            }
            e.send(Tag(i), NodeId(0), NodeId(1), LinkKind::Data).unwrap();
            if i % 7 == 0 {
                let now = e.now();
                e.run_until(now + t(1), |_, _| {}).unwrap();
            }
            let l = e.links().get(&key).unwrap();
            assert_eq!(l.sent, l.delivered + l.dropped + l.in_flight());
        }
        assert_eq!(e.links().drop_count(&key).unwrap(), 10);
    }

    #[test]
    fn freeze_and_thaw_shift_selected_events() {
        let mut e: Engine<Tag> = Engine::new();
        e.schedule(t(5), NodeId(0), Tag(1)).unwrap();
        e.schedule(t(6), NodeId(0), Tag(2)).unwrap();
        let frozen = e.freeze(|p| p.0 == 1);
        assert_eq!(frozen.len(), 1);
        e.run_until(t(10), |_, _| {}).unwrap();
        e.thaw(frozen, t(10));
        let ev = e.pop_next(SimTime::MAX).unwrap();
        assert_eq!(ev.fire_time, t(15));
    }
}
