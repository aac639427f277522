//! Queue disciplines at the base-station buffer: Drop-tail FIFO and CoDel.
//!
//! CoDel follows the Nichols-Jacobson pseudocode: per-packet sojourn time is
//! checked at dequeue; once the sojourn stays at or above `target` for a full
//! `interval` the queue enters the dropping state, and successive drops are
//! spaced by `interval / sqrt(count)`. Leaving the dropping state happens
//! when a dequeued packet's sojourn falls below target or the backlog shrinks
//! to at most one max-size packet.

use std::collections::VecDeque;

use crate::time::{SimDuration, SimTime};

pub const DEFAULT_QUEUE_CAPACITY_PACKETS: usize = 50_000;
pub const DEFAULT_CODEL_TARGET: SimDuration = SimDuration::from_millis(5);
pub const DEFAULT_CODEL_INTERVAL: SimDuration = SimDuration::from_millis(100);

/// A packet sitting in (or moving through) a base-station queue.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuedPacket<T> {
    pub bytes: u64,
    pub enqueue_time: SimTime,
    pub flow: u32,
    pub seq: u64,
    pub payload: T,
}

/// Result of one dequeue call: the delivered packet, if any, plus whatever
/// the discipline dropped while getting there.
#[derive(Debug)]
pub struct Dequeued<T> {
    pub packet: Option<QueuedPacket<T>>,
    pub dropped: Vec<QueuedPacket<T>>,
}

impl<T> Dequeued<T> {
    fn empty() -> Self {
        Dequeued { packet: None, dropped: Vec::new() }
    }
}

/// Plain FIFO with tail drop at a fixed packet-count capacity.
#[derive(Debug)]
pub struct DropTailQueue<T> {
    capacity_packets: usize,
    buf: VecDeque<QueuedPacket<T>>,
    tail_drops: u64,
}

impl<T> DropTailQueue<T> {
    pub fn new(capacity_packets: usize) -> Self {
        DropTailQueue { capacity_packets, buf: VecDeque::new(), tail_drops: 0 }
    }

    /// Appends unless full; returns false (and counts the drop) on tail drop.
    pub fn enqueue(&mut self, pkt: QueuedPacket<T>) -> bool {
        if self.buf.len() < self.capacity_packets {
            self.buf.push_back(pkt);
            true
        } else {
            self.tail_drops += 1;
            false
        }
    }

    pub fn dequeue(&mut self) -> Option<QueuedPacket<T>> {
        self.buf.pop_front()
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn head(&self) -> Option<&QueuedPacket<T>> {
        self.buf.front()
    }

    pub fn drops(&self) -> u64 {
        self.tail_drops
    }
}

/// CoDel over a FIFO, with the same hard packet-count cap as Drop-tail so
/// comparisons isolate the discipline.
#[derive(Debug)]
pub struct CoDelQueue<T> {
    target: SimDuration,
    interval: SimDuration,
    capacity_packets: usize,
    buf: VecDeque<QueuedPacket<T>>,
    bytes: u64,
    // Largest packet seen; the backlog must exceed this for drops to engage.
    maxpacket: u64,
    first_above_time: Option<SimTime>,
    dropping: bool,
    count: u64,
    lastcount: u64,
    drop_next: SimTime,
    tail_drops: u64,
    aqm_drops: u64,
}

impl<T> CoDelQueue<T> {
    pub fn new(target: SimDuration, interval: SimDuration, capacity_packets: usize) -> Self {
        CoDelQueue {
            target,
            interval,
            capacity_packets,
            buf: VecDeque::new(),
            bytes: 0,
            maxpacket: 0,
            first_above_time: None,
            dropping: false,
            count: 0,
            lastcount: 0,
            drop_next: SimTime::ZERO,
            tail_drops: 0,
            aqm_drops: 0,
        }
    }

    /// Tail-drops only at the hard capacity; CoDel itself drops at dequeue.
    pub fn enqueue(&mut self, pkt: QueuedPacket<T>) -> bool {
        if self.buf.len() >= self.capacity_packets {
            self.tail_drops += 1;
            return false;
        }
        self.maxpacket = self.maxpacket.max(pkt.bytes);
        self.bytes += pkt.bytes;
        self.buf.push_back(pkt);
        true
    }

    // The `dodeque` helper from the pseudocode: pop the head and classify
    // whether its sojourn keeps us (or puts us) in the above-target regime.
    fn pop_classify(&mut self, now: SimTime) -> Option<(QueuedPacket<T>, bool)> {
        let pkt = match self.buf.pop_front() {
            Some(p) => p,
            None => {
                self.first_above_time = None;
                return None;
            }
        };
        self.bytes -= pkt.bytes;
        let sojourn = now.saturating_sub(pkt.enqueue_time);
        let ok_to_drop = if sojourn < self.target || self.bytes <= self.maxpacket {
            self.first_above_time = None;
            false
        } else {
            match self.first_above_time {
                None => {
                    self.first_above_time = Some(now + self.interval);
                    false
                }
                Some(fat) => now >= fat,
            }
        };
        Some((pkt, ok_to_drop))
    }

    fn control_law(&self, t: SimTime) -> SimTime {
        t + self.interval.div_f64((self.count as f64).sqrt())
    }

    pub fn dequeue(&mut self, now: SimTime) -> Dequeued<T> {
        let mut out = Dequeued::empty();
        let (mut pkt, mut ok_to_drop) = match self.pop_classify(now) {
            Some(r) => r,
            None => {
                // An empty queue takes us out of the dropping state.
                self.dropping = false;
                return out;
            }
        };
        if self.dropping {
            if !ok_to_drop {
                self.dropping = false;
            } else {
                while self.dropping && now >= self.drop_next {
                    out.dropped.push(pkt);
                    self.aqm_drops += 1;
                    self.count += 1;
                    match self.pop_classify(now) {
                        None => {
                            self.dropping = false;
                            return out;
                        }
                        Some((p, ok)) => {
                            pkt = p;
                            ok_to_drop = ok;
                        }
                    }
                    if !ok_to_drop {
                        self.dropping = false;
                    } else {
                        self.drop_next = self.control_law(self.drop_next);
                    }
                }
            }
        } else if ok_to_drop {
            out.dropped.push(pkt);
            self.aqm_drops += 1;
            match self.pop_classify(now) {
                None => {
                    // Keep the freshly computed drop state; the next call on
                    // an empty queue clears it, as in the pseudocode.
                    self.enter_dropping(now);
                    return out;
                }
                Some((p, _)) => pkt = p,
            }
            self.enter_dropping(now);
        }
        out.packet = Some(pkt);
        out
    }

    fn enter_dropping(&mut self, now: SimTime) {
        self.dropping = true;
        // If the minimum went above target close to when it last went below,
        // restart from the drop rate that last controlled the queue.
        let delta = self.count.saturating_sub(self.lastcount);
        self.count = if delta > 1 && now.saturating_sub(self.drop_next) < self.interval * 16 {
            delta
        } else {
            1
        };
        self.drop_next = self.control_law(now);
        self.lastcount = self.count;
    }

    /// Restores a packet to the head after a dequeue the caller could not
    /// use (e.g. a scheduling grant too small for it). Sojourn bookkeeping is
    /// unaffected since the enqueue time rides with the packet.
    pub fn requeue_front(&mut self, pkt: QueuedPacket<T>) {
        self.bytes += pkt.bytes;
        self.buf.push_front(pkt);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn head(&self) -> Option<&QueuedPacket<T>> {
        self.buf.front()
    }

    pub fn drops(&self) -> u64 {
        self.tail_drops + self.aqm_drops
    }

    pub fn aqm_drops(&self) -> u64 {
        self.aqm_drops
    }

    pub fn in_dropping_state(&self) -> bool {
        self.dropping
    }

    pub fn drop_count(&self) -> u64 {
        self.count
    }
}

/// The two disciplines behind one face, so the scheduler does not care which
/// is attached to a UE.
#[derive(Debug)]
pub enum Discipline<T> {
    DropTail(DropTailQueue<T>),
    CoDel(CoDelQueue<T>),
}

impl<T> Discipline<T> {
    pub fn enqueue(&mut self, pkt: QueuedPacket<T>) -> bool {
        match self {
            Discipline::DropTail(q) => q.enqueue(pkt),
            Discipline::CoDel(q) => q.enqueue(pkt),
        }
    }

    pub fn dequeue(&mut self, now: SimTime) -> Dequeued<T> {
        match self {
            Discipline::DropTail(q) => {
                Dequeued { packet: q.dequeue(), dropped: Vec::new() }
            }
            Discipline::CoDel(q) => q.dequeue(now),
        }
    }

    pub fn requeue_front(&mut self, pkt: QueuedPacket<T>) {
        match self {
            Discipline::DropTail(q) => q.buf.push_front(pkt),
            Discipline::CoDel(q) => q.requeue_front(pkt),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Discipline::DropTail(q) => q.len(),
            Discipline::CoDel(q) => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn head_bytes(&self) -> Option<u64> {
        match self {
            Discipline::DropTail(q) => q.head().map(|p| p.bytes),
            Discipline::CoDel(q) => q.head().map(|p| p.bytes),
        }
    }

    pub fn head_sojourn(&self, now: SimTime) -> SimDuration {
        let head = match self {
            Discipline::DropTail(q) => q.head(),
            Discipline::CoDel(q) => q.head(),
        };
        head.map_or(SimDuration::ZERO, |p| now.saturating_sub(p.enqueue_time))
    }

    pub fn drops(&self) -> u64 {
        match self {
            Discipline::DropTail(q) => q.drops(),
            Discipline::CoDel(q) => q.drops(),
        }
    }
}
