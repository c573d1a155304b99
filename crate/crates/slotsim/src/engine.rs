//! Deterministic discrete-event kernel.
//!
//! The kernel owns a virtual clock and a priority queue of timestamped
//! events. Events are totally ordered by `(time, kind rank, seq)` where
//! `seq` is the insertion counter, so two runs that push the same events
//! pop them in the same order. The kind rank is fixed: completions are
//! handled before PR events, PR events before starts, starts before
//! scheduler ticks, and metric ticks last, so resources freed at an
//! instant are visible before anything scheduled at that instant reacts.

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

pub type AppId = u32;
pub type TaskId = u32;
pub type SlotId = u32;
pub type BoardId = u32;

/// What happened, plus the identifiers needed to interpret it.
///
/// For bundled 3-in-1 stages the `task` field carries the index of the
/// first member task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    AppArrival {
        app: AppId,
    },
    PrEnqueued {
        app: AppId,
        task: TaskId,
        slot: SlotId,
        board: BoardId,
    },
    PrStart {
        app: AppId,
        task: TaskId,
        slot: SlotId,
        board: BoardId,
        /// Queue wait in µs: service start minus enqueue time.
        blocked: u64,
    },
    PrComplete {
        app: AppId,
        task: TaskId,
        slot: SlotId,
        board: BoardId,
    },
    BatchItemStart {
        app: AppId,
        task: TaskId,
        item: u32,
        slot: SlotId,
        board: BoardId,
    },
    BatchItemComplete {
        app: AppId,
        task: TaskId,
        item: u32,
        slot: SlotId,
        board: BoardId,
    },
    SchedulerTick {
        board: BoardId,
    },
    MetricWindowTick {
        window: u32,
        d: f64,
    },
    PrewarmStart {
        board: BoardId,
        layout: String,
    },
    SwitchTriggered {
        from: BoardId,
        to: BoardId,
        layout: String,
    },
    MigrationComplete {
        from: BoardId,
        to: BoardId,
        moved: u32,
        drained: u32,
    },
    AppComplete {
        app: AppId,
    },
}

impl EventKind {
    /// Fixed ordering rank for events sharing a timestamp.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::PrComplete { .. }
            | EventKind::BatchItemComplete { .. }
            | EventKind::MigrationComplete { .. }
            | EventKind::AppComplete { .. } => 0,
            EventKind::PrEnqueued { .. }
            | EventKind::PrStart { .. }
            | EventKind::PrewarmStart { .. } => 1,
            EventKind::AppArrival { .. }
            | EventKind::BatchItemStart { .. }
            | EventKind::SwitchTriggered { .. } => 2,
            EventKind::SchedulerTick { .. } => 3,
            EventKind::MetricWindowTick { .. } => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::AppArrival { .. } => "AppArrival",
            EventKind::PrEnqueued { .. } => "PrEnqueued",
            EventKind::PrStart { .. } => "PrStart",
            EventKind::PrComplete { .. } => "PrComplete",
            EventKind::BatchItemStart { .. } => "BatchItemStart",
            EventKind::BatchItemComplete { .. } => "BatchItemComplete",
            EventKind::SchedulerTick { .. } => "SchedulerTick",
            EventKind::MetricWindowTick { .. } => "MetricWindowTick",
            EventKind::PrewarmStart { .. } => "PrewarmStart",
            EventKind::SwitchTriggered { .. } => "SwitchTriggered",
            EventKind::MigrationComplete { .. } => "MigrationComplete",
            EventKind::AppComplete { .. } => "AppComplete",
        }
    }
}

/// A timestamped event. `seq` is assigned by the queue at push time and
/// is unique per run, which makes the `(t, rank, seq)` order strict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: SimTime,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    fn order_key(&self) -> (u64, u8, u64) {
        (self.t.as_us(), self.kind.rank(), self.seq)
    }
}

#[derive(Debug, Clone)]
struct QueuedEvent(Event);

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.0.order_key() == other.0.order_key()
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for earliest-first.
        other.0.order_key().cmp(&self.0.order_key())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("event pushed into the past: event at {event} but clock is {clock}")]
    PushIntoPast { event: SimTime, clock: SimTime },
}

/// Clock + event queue + processed-event trace.
#[derive(Debug, Default)]
pub struct Kernel {
    clock: SimTime,
    next_seq: u64,
    queue: BinaryHeap<QueuedEvent>,
    processed: Vec<Event>,
}

impl Kernel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Schedules an event. Rejects times earlier than the current clock,
    /// which would indicate a scheduling bug in the caller.
    pub fn push(&mut self, t: SimTime, kind: EventKind) -> Result<(), EngineError> {
        if t < self.clock {
            return Err(EngineError::PushIntoPast {
                event: t,
                clock: self.clock,
            });
        }
        let ev = Event {
            t,
            seq: self.next_seq,
            kind,
        };
        self.next_seq += 1;
        self.queue.push(QueuedEvent(ev));
        Ok(())
    }

    /// Pops the next event with time ≤ `until`, advancing the clock to it.
    pub fn pop_next(&mut self, until: SimTime) -> Option<Event> {
        if self.queue.peek().map(|e| e.0.t > until).unwrap_or(true) {
            return None;
        }
        let ev = self.queue.pop().unwrap().0;
        debug_assert!(ev.t >= self.clock);
        self.clock = ev.t;
        Some(ev)
    }

    /// Records a processed event into the trace.
    pub fn record(&mut self, ev: Event) {
        self.processed.push(ev);
    }

    /// Finalizes the trace: events sorted by `(t, rank, seq)`.
    ///
    /// Processing order and canonical timeline order can differ when a
    /// handler emits same-timestamp events of a lower rank than the one
    /// being handled (a scheduler tick enqueuing a PR request, say); the
    /// serialized trace always reads in the canonical order.
    pub fn into_trace(mut self) -> Vec<Event> {
        self.processed.sort_by_key(|e| e.order_key());
        self.processed
    }
}

/// A fully processed run: the canonically ordered event list plus run
/// metadata, serializable as JSON Lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTrace {
    pub meta: TraceMeta,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub config_digest: String,
    pub workload_digest: String,
    pub policy: String,
}

impl EventTrace {
    /// One JSON object per line: a `meta` header line, then one event
    /// per line with fields `t` (µs), `seq`, `kind`, and identifiers.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(&serde_json::json!({ "meta": self.meta }).to_string());
        out.push('\n');
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Self, serde_json::Error> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        #[derive(Deserialize)]
        struct Header {
            meta: TraceMeta,
        }
        let header: Header = serde_json::from_str(lines.next().unwrap_or("{}"))?;
        let events = lines
            .map(serde_json::from_str)
            .collect::<Result<Vec<Event>, _>>()?;
        Ok(EventTrace {
            meta: header.meta,
            events,
        })
    }

    /// Checks the strict `(t, rank, seq)` ordering invariant.
    pub fn is_sorted(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| w[0].order_key() < w[1].order_key())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(board: BoardId) -> EventKind {
        EventKind::SchedulerTick { board }
    }

    #[test]
    fn push_into_past_is_rejected() {
        let mut k = Kernel::new();
        k.push(SimTime::from_ms(5), tick(0)).unwrap();
        let ev = k.pop_next(SimTime::from_ms(100)).unwrap();
        assert_eq!(ev.t, SimTime::from_ms(5));
        // clock is now 5ms; pushes at or after the clock are fine
        k.push(SimTime::from_ms(5), tick(0)).unwrap();
        let err = k.push(SimTime::from_ms(2), tick(0)).unwrap_err();
        assert_eq!(
            err,
            EngineError::PushIntoPast {
                event: SimTime::from_ms(2),
                clock: SimTime::from_ms(5),
            }
        );
    }

    #[test]
    fn completions_pop_before_ticks_at_equal_time() {
        let mut k = Kernel::new();
        k.push(SimTime::from_ms(10), tick(0)).unwrap();
        k.push(
            SimTime::from_ms(10),
            EventKind::PrComplete {
                app: 1,
                task: 0,
                slot: 0,
                board: 0,
            },
        )
        .unwrap();
        let first = k.pop_next(SimTime::from_ms(10)).unwrap();
        assert_eq!(first.kind.name(), "PrComplete");
        let second = k.pop_next(SimTime::from_ms(10)).unwrap();
        assert_eq!(second.kind.name(), "SchedulerTick");
    }

    #[test]
    fn equal_time_and_rank_breaks_ties_by_seq() {
        let mut k = Kernel::new();
        for board in [3, 1, 2] {
            k.push(SimTime::from_ms(7), tick(board)).unwrap();
        }
        let order: Vec<BoardId> = std::iter::from_fn(|| k.pop_next(SimTime::from_ms(7)))
            .map(|e| match e.kind {
                EventKind::SchedulerTick { board } => board,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(order, vec![3, 1, 2]);
    }

    #[test]
    fn empty_queue_terminates_early() {
        let mut k = Kernel::new();
        assert!(k.pop_next(SimTime::from_ms(100)).is_none());
        assert_eq!(k.clock(), SimTime::ZERO);
    }

    #[test]
    fn pop_respects_until_bound() {
        let mut k = Kernel::new();
        k.push(SimTime::from_ms(50), tick(0)).unwrap();
        assert!(k.pop_next(SimTime::from_ms(10)).is_none());
        assert!(k.pop_next(SimTime::from_ms(50)).is_some());
    }

    #[test]
    fn trace_jsonl_round_trips() {
        let meta = TraceMeta {
            seed: 7,
            config_digest: "abc".into(),
            workload_digest: "def".into(),
            policy: "fcfs".into(),
        };
        let events = vec![
            Event {
                t: SimTime::from_ms(1),
                seq: 0,
                kind: EventKind::AppArrival { app: 0 },
            },
            Event {
                t: SimTime::from_ms(2),
                seq: 1,
                kind: EventKind::PrStart {
                    app: 0,
                    task: 0,
                    slot: 1,
                    board: 0,
                    blocked: 250,
                },
            },
        ];
        let trace = EventTrace { meta, events };
        let text = trace.to_jsonl();
        let back = EventTrace::from_jsonl(&text).unwrap();
        assert_eq!(trace, back);
        assert!(trace.is_sorted());
    }
}
