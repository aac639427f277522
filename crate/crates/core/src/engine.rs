//! Deterministic discrete-event core: virtual clock plus an ordered event
//! queue. Events fire in `(fire_time, sequence)` order, where `sequence` is a
//! monotonically increasing insertion counter, so ties break FIFO and every
//! run of the same schedule replays identically.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::time::{SimDuration, SimTime};

/// Opaque handle for a scheduled event, usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("event time {at} is before current clock {now}")]
    InPast { at: SimTime, now: SimTime },
}

struct Entry<T> {
    fire_at: SimTime,
    seq: u64,
    action: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}
impl<T> Eq for Entry<T> {}

impl<T> Ord for Entry<T> {
    // Reversed so the BinaryHeap pops the earliest (fire_at, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}
impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Virtual clock and event queue. Single-threaded; one instance per
/// simulation.
pub struct Engine<T> {
    now: SimTime,
    heap: BinaryHeap<Entry<T>>,
    next_seq: u64,
    // Lazy cancellation: tombstoned sequence numbers are skipped on pop.
    cancelled: HashSet<u64>,
}

impl<T> Default for Engine<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Engine<T> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            heap: BinaryHeap::new(),
            next_seq: 0,
            cancelled: HashSet::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Enqueues `action` at `now + delay`. Delays are unsigned by type, so a
    /// negative delay is unrepresentable at this boundary.
    pub fn schedule(&mut self, delay: SimDuration, action: T) -> EventHandle {
        let at = self.now + delay;
        self.push(at, action)
    }

    /// Enqueues `action` at absolute time `at`; rejects times in the past.
    pub fn schedule_at(&mut self, at: SimTime, action: T) -> Result<EventHandle, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::InPast { at, now: self.now });
        }
        Ok(self.push(at, action))
    }

    fn push(&mut self, at: SimTime, action: T) -> EventHandle {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { fire_at: at, seq, action });
        EventHandle(seq)
    }

    /// Tombstones a pending event. Returns false if it already fired or was
    /// already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Pops the next live event with `fire_time <= t_end`, advancing the
    /// clock to its fire time. Returns `None` once the queue holds nothing
    /// due by `t_end`; the clock is left untouched in that case (use
    /// [`Engine::advance_to`] to finish the interval).
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<(SimTime, T)> {
        loop {
            let fire_at = self.heap.peek()?.fire_at;
            if fire_at > t_end {
                return None;
            }
            let entry = self.heap.pop().expect("peeked entry");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            return Some((entry.fire_at, entry.action));
        }
    }

    /// Moves the clock forward to `t_end` (never backward).
    pub fn advance_to(&mut self, t_end: SimTime) {
        if t_end > self.now {
            self.now = t_end;
        }
    }

    /// Dispatches every event due by `t_end` to `handler` and returns the
    /// final clock value (= `t_end`). Handlers that need to schedule new
    /// events should drive [`Engine::pop_due`] directly instead.
    pub fn run_until(&mut self, t_end: SimTime, mut handler: impl FnMut(SimTime, T)) -> SimTime {
        while let Some((t, action)) = self.pop_due(t_end) {
            handler(t, action);
        }
        self.advance_to(t_end);
        self.now
    }

    /// Number of scheduled, not-yet-fired entries (tombstones included).
    pub fn pending(&self) -> usize {
        self.heap.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_times_fire_in_insertion_order() {
        let mut eng: Engine<&str> = Engine::new();
        eng.schedule(SimDuration::ZERO, "a");
        eng.schedule(SimDuration::ZERO, "b");
        let mut fired = Vec::new();
        eng.run_until(SimTime::ZERO, |_, x| fired.push(x));
        assert_eq!(fired, vec!["a", "b"]);
    }

    #[test]
    fn schedule_is_relative_to_now() {
        let mut eng: Engine<u8> = Engine::new();
        eng.advance_to(SimTime::from_secs_f64(1.0));
        eng.schedule(SimDuration::from_millis(40), 1);
        let (t, _) = eng.pop_due(SimTime::from_secs_f64(10.0)).unwrap();
        assert_eq!(t, SimTime::from_nanos(1_040_000_000));
    }

    #[test]
    fn cancelled_event_never_dispatches() {
        let mut eng: Engine<u8> = Engine::new();
        let h = eng.schedule(SimDuration::from_millis(1), 1);
        eng.schedule(SimDuration::from_millis(2), 2);
        assert!(eng.cancel(h));
        assert!(!eng.cancel(h));
        let mut fired = Vec::new();
        eng.run_until(SimTime::from_secs(1), |_, x| fired.push(x));
        assert_eq!(fired, vec![2]);
    }

    #[test]
    fn run_until_empty_queue_advances_clock() {
        let mut eng: Engine<u8> = Engine::new();
        let end = eng.run_until(SimTime::from_secs(10), |_, _| panic!("no events"));
        assert_eq!(end, SimTime::from_secs(10));
        assert_eq!(eng.now(), SimTime::from_secs(10));
    }

    #[test]
    fn run_until_stops_at_t_end() {
        let mut eng: Engine<u8> = Engine::new();
        for s in [1, 2, 3] {
            eng.schedule(SimDuration::from_secs(s), s as u8);
        }
        let mut fired = Vec::new();
        eng.run_until(SimTime::from_secs(2), |_, x| fired.push(x));
        assert_eq!(fired, vec![1, 2]);
        assert_eq!(eng.pending(), 1);
    }

    #[test]
    fn schedule_at_rejects_past() {
        let mut eng: Engine<u8> = Engine::new();
        eng.advance_to(SimTime::from_secs(5));
        let err = eng.schedule_at(SimTime::from_secs(1), 0).unwrap_err();
        assert!(matches!(err, ScheduleError::InPast { .. }));
    }

    proptest! {
        /// Dispatch order is a strict total order on (fire_time, sequence).
        #[test]
        fn dispatch_order_total(delays in prop::collection::vec(0u64..5_000, 1..200)) {
            let mut eng: Engine<usize> = Engine::new();
            for (i, d) in delays.iter().enumerate() {
                eng.schedule(SimDuration::from_nanos(*d), i);
            }
            let mut keys: Vec<(SimTime, usize)> = Vec::new();
            eng.run_until(SimTime::from_secs(1), |t, i| keys.push((t, i)));
            prop_assert_eq!(keys.len(), delays.len());
            for w in keys.windows(2) {
                // Same fire time implies ascending insertion index.
                prop_assert!(w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 < w[1].1));
            }
        }
    }
}
