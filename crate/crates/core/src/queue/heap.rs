//! Binary max-heap of anomaly events keyed by severity.
//!
//! Implemented by hand rather than on `std::collections::BinaryHeap` because
//! the queue must support deleting an arbitrary event by id and restoring the
//! heap order afterwards (reheapification), which the standard heap does not
//! expose. An id -> slot index map keeps removal O(log n).
//!
//! Ordering: higher severity first; ties broken by earlier arrival time, then
//! by lower id, which makes the extraction order total and deterministic.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::monitor::AnomalyEvent;

/// `Greater` means `a` outranks `b` and should leave the queue first.
pub(crate) fn cmp_priority(a: &AnomalyEvent, b: &AnomalyEvent) -> Ordering {
    a.severity_ms
        .total_cmp(&b.severity_ms)
        .then_with(|| b.arrival_time_s.total_cmp(&a.arrival_time_s))
        .then_with(|| b.id.cmp(&a.id))
}

#[derive(Debug, Clone, Default)]
pub struct SeverityQueue {
    slots: Vec<AnomalyEvent>,
    position: HashMap<u64, usize>,
}

impl SeverityQueue {
    pub fn new() -> Self {
        SeverityQueue::default()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// The event that would leave next, if any.
    pub fn peek(&self) -> Option<&AnomalyEvent> {
        self.slots.first()
    }

    /// Iterates the backing storage in heap order (not priority order).
    pub fn iter(&self) -> impl Iterator<Item = &AnomalyEvent> {
        self.slots.iter()
    }

    pub fn insert(&mut self, event: AnomalyEvent) -> Result<()> {
        if self.position.contains_key(&event.id) {
            return Err(Error::invalid_argument(format!(
                "event id {} is already queued",
                event.id
            )));
        }
        let idx = self.slots.len();
        self.position.insert(event.id, idx);
        self.slots.push(event);
        self.sift_up(idx);
        Ok(())
    }

    /// Removes and returns the most severe event.
    pub fn extract_max(&mut self) -> Result<AnomalyEvent> {
        if self.slots.is_empty() {
            return Err(Error::EmptyQueue);
        }
        Ok(self.remove_at(0))
    }

    /// Removes an arbitrary event by id, restoring the heap order afterwards.
    pub fn remove(&mut self, id: u64) -> Result<AnomalyEvent> {
        let idx = *self
            .position
            .get(&id)
            .ok_or_else(|| Error::NotFound(format!("event id {id}")))?;
        Ok(self.remove_at(idx))
    }

    /// Removes the least severe event (linear scan; used by eviction).
    pub fn remove_lowest(&mut self) -> Result<AnomalyEvent> {
        if self.slots.is_empty() {
            return Err(Error::EmptyQueue);
        }
        // The minimum must be a leaf, but scanning everything is simpler and
        // the queue stays small in practice.
        let mut lowest = 0;
        for i in 1..self.slots.len() {
            if cmp_priority(&self.slots[i], &self.slots[lowest]) == Ordering::Less {
                lowest = i;
            }
        }
        Ok(self.remove_at(lowest))
    }

    /// Verifies the heap order and the id index; used by tests and debug checks.
    pub fn check_invariants(&self) -> bool {
        for i in 1..self.slots.len() {
            let parent = (i - 1) / 2;
            if cmp_priority(&self.slots[parent], &self.slots[i]) == Ordering::Less {
                return false;
            }
        }
        self.position.len() == self.slots.len()
            && self
                .position
                .iter()
                .all(|(id, &idx)| self.slots.get(idx).map(|e| e.id) == Some(*id))
    }

    fn remove_at(&mut self, idx: usize) -> AnomalyEvent {
        let last = self.slots.len() - 1;
        self.slots.swap(idx, last);
        let removed = self.slots.pop().expect("slot checked non-empty");
        self.position.remove(&removed.id);
        if idx < self.slots.len() {
            self.position.insert(self.slots[idx].id, idx);
            // The swapped-in element may violate the order in either direction.
            self.sift_down(idx);
            self.sift_up(idx);
        }
        removed
    }

    fn sift_up(&mut self, mut idx: usize) {
        while idx > 0 {
            let parent = (idx - 1) / 2;
            if cmp_priority(&self.slots[idx], &self.slots[parent]) == Ordering::Greater {
                self.swap_slots(idx, parent);
                idx = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut idx: usize) {
        loop {
            let left = 2 * idx + 1;
            let right = left + 1;
            let mut best = idx;
            if left < self.slots.len()
                && cmp_priority(&self.slots[left], &self.slots[best]) == Ordering::Greater
            {
                best = left;
            }
            if right < self.slots.len()
                && cmp_priority(&self.slots[right], &self.slots[best]) == Ordering::Greater
            {
                best = right;
            }
            if best == idx {
                break;
            }
            self.swap_slots(idx, best);
            idx = best;
        }
    }

    fn swap_slots(&mut self, a: usize, b: usize) {
        self.slots.swap(a, b);
        self.position.insert(self.slots[a].id, a);
        self.position.insert(self.slots[b].id, b);
    }
}
