// SPDX-License-Identifier: Apache-2.0
//! Deterministic event queue ordered by `(time, seq)`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

use super::SimTime;

/// Handle for cancelling a scheduled event; also its tiebreak sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event at {at} is before current time {now}")]
pub struct PastEvent {
    pub at: SimTime,
    pub now: SimTime,
}

struct Scheduled<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed: BinaryHeap is a max-heap and we want the earliest event first.
impl<E> Ord for Scheduled<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

pub struct Scheduler<E> {
    queue: BinaryHeap<Scheduled<E>>,
    cancelled: HashSet<u64>,
    now: SimTime,
    next_seq: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Scheduler {
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            now: SimTime::ZERO,
            next_seq: 0,
        }
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, time: SimTime, event: E) -> Result<EventId, PastEvent> {
        if time < self.now {
            return Err(PastEvent { at: time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled { time, seq, event });
        Ok(EventId(seq))
    }

    /// Cancelling an already-fired or unknown event is a no-op.
    pub fn cancel(&mut self, id: EventId) {
        if id.0 < self.next_seq {
            self.cancelled.insert(id.0);
        }
    }

    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.skip_cancelled();
        self.queue.peek().map(|s| s.time)
    }

    /// Pops the next live event and advances the clock to it.
    pub fn pop(&mut self) -> Option<(SimTime, EventId, E)> {
        self.skip_cancelled();
        let s = self.queue.pop()?;
        debug_assert!(s.time >= self.now);
        self.now = s.time;
        Some((s.time, EventId(s.seq), s.event))
    }

    pub fn is_empty(&mut self) -> bool {
        self.peek_time().is_none()
    }

    fn skip_cancelled(&mut self) {
        while let Some(top) = self.queue.peek() {
            if self.cancelled.remove(&top.seq) {
                self.queue.pop();
            } else {
                break;
            }
        }
    }
}
