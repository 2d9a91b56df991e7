//! FIFO replay buffer of target-labeled query samples.
//!
//! Each entry is a function-level graph reference plus the insertion
//! list that produced the queried sample, and the binary label the
//! target returned for it. The buffer is the substitute model's
//! training set.

use std::collections::VecDeque;
use std::sync::Arc;

use fcg_core::FunctionCallGraph;

#[derive(Debug, Clone)]
pub struct BufferEntry {
    pub graph: Arc<FunctionCallGraph>,
    pub insertions: Vec<(u32, u32)>,
    /// true when the target labeled the sample malicious
    pub malicious: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<BufferEntry>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        ReplayBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(1024)),
        }
    }

    /// Appends one labeled sample, evicting the oldest entry at capacity.
    pub fn record(
        &mut self,
        graph: Arc<FunctionCallGraph>,
        insertions: Vec<(u32, u32)>,
        malicious: bool,
    ) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(BufferEntry {
            graph,
            insertions,
            malicious,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    pub fn get(&self, index: usize) -> Option<&BufferEntry> {
        self.entries.get(index)
    }
}
