// SPDX-License-Identifier: Apache-2.0
//! Per-router FIFO of the best CREQ seen for each recent flood.
//!
//! Entries are retired only by displacement: once `capacity` newer floods
//! have been recorded, the oldest entry falls off the front. Updates never
//! reorder the queue.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::engine::SimTime;
use crate::fabric::LinkId;
use crate::metric::Cdm;
use crate::wire::FloodKey;

pub const DEFAULT_CAPACITY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryState {
    Active,
    /// A CACC has passed; the reverse path is frozen.
    Committed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FloodQueueEntry {
    pub key: FloodKey,
    /// CDM as received, before this router's increment.
    pub best_cdm: Cdm,
    /// Link on which the best copy arrived; the next hop toward the source.
    pub arrival_link: LinkId,
    pub state: EntryState,
    pub inserted_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Improvement {
    Improved,
    NotBetter,
    CommittedReject,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FloodQueueError {
    #[error("flood {0} already recorded")]
    DuplicateKey(FloodKey),
    #[error("flood {0} not in queue")]
    MissingEntry(FloodKey),
}

#[derive(Debug, Clone)]
pub struct FloodQueue {
    entries: VecDeque<FloodQueueEntry>,
    // key -> absolute insertion sequence; position = seq - head_seq
    index: HashMap<FloodKey, u64>,
    head_seq: u64,
    capacity: usize,
}

impl FloodQueue {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "flood queue capacity must be positive");
        FloodQueue {
            entries: VecDeque::with_capacity(capacity.min(4096)),
            index: HashMap::new(),
            head_seq: 0,
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn position(&self, key: &FloodKey) -> Option<usize> {
        self.index.get(key).map(|seq| (seq - self.head_seq) as usize)
    }

    pub fn lookup(&self, key: &FloodKey) -> Option<&FloodQueueEntry> {
        self.position(key).map(|i| &self.entries[i])
    }

    /// Appends a new Active entry, returning the evicted front entry when full.
    pub fn record_new(
        &mut self,
        key: FloodKey,
        cdm: Cdm,
        arrival_link: LinkId,
        now: SimTime,
    ) -> Result<Option<FloodQueueEntry>, FloodQueueError> {
        if self.index.contains_key(&key) {
            return Err(FloodQueueError::DuplicateKey(key));
        }
        let evicted = if self.entries.len() == self.capacity {
            let old = self.entries.pop_front().expect("full queue is non-empty");
            self.index.remove(&old.key);
            self.head_seq += 1;
            Some(old)
        } else {
            None
        };
        let seq = self.head_seq + self.entries.len() as u64;
        self.entries.push_back(FloodQueueEntry {
            key,
            best_cdm: cdm,
            arrival_link,
            state: EntryState::Active,
            inserted_at: now,
        });
        self.index.insert(key, seq);
        Ok(evicted)
    }

    /// Replaces the best record on a strictly smaller CDM. Ties do not update.
    pub fn try_improve(
        &mut self,
        key: &FloodKey,
        cdm: Cdm,
        arrival_link: LinkId,
    ) -> Result<Improvement, FloodQueueError> {
        let i = self
            .position(key)
            .ok_or(FloodQueueError::MissingEntry(*key))?;
        let entry = &mut self.entries[i];
        Ok(match entry.state {
            EntryState::Committed => Improvement::CommittedReject,
            EntryState::Active if cdm < entry.best_cdm => {
                entry.best_cdm = cdm;
                entry.arrival_link = arrival_link;
                Improvement::Improved
            }
            EntryState::Active => Improvement::NotBetter,
        })
    }

    pub fn commit(&mut self, key: &FloodKey) -> Result<(), FloodQueueError> {
        let i = self
            .position(key)
            .ok_or(FloodQueueError::MissingEntry(*key))?;
        self.entries[i].state = EntryState::Committed;
        Ok(())
    }

    /// Entries front (oldest) to back.
    pub fn iter(&self) -> impl Iterator<Item = &FloodQueueEntry> {
        self.entries.iter()
    }
}

impl Default for FloodQueue {
    fn default() -> Self {
        FloodQueue::new(DEFAULT_CAPACITY)
    }
}
