//! Event queue: a (time, sequence)-ordered min-heap. The sequence number is
//! assigned at scheduling time, so same-instant events run in the order they
//! were scheduled and the whole execution is deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::units::SimTime;

struct Entry<E> {
    time: SimTime,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time
    }
}

impl<E> Eq for Entry<E> {}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we pop the earliest time.
        other.time.cmp(&self.time)
    }
}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
}

impl<E> EventQueue<E> {
    pub fn new() -> EventQueue<E> {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }

    /// Schedules `event` at `at_us`, returning the full timestamp it got.
    pub fn schedule(&mut self, at_us: f64, event: E) -> SimTime {
        let time = SimTime::new(at_us, self.next_seq);
        self.next_seq += 1;
        self.heap.push(Entry { time, event });
        time
    }

    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        self.heap.pop().map(|e| (e.time, e.event))
    }

    /// All still-pending events, in no particular order.
    pub fn events(&self) -> impl Iterator<Item = &E> {
        self.heap.iter().map(|e| &e.event)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.time)
    }
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue::new()
    }
}
