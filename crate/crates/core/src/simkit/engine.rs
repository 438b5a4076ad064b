use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use super::SimError;
use crate::Micros;

struct Entry<E> {
    time: Micros,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed so the max-heap pops the earliest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Event queue with a virtual clock. Events run in (time, insertion) order.
pub struct Scheduler<E> {
    now: Micros,
    seq: u64,
    heap: BinaryHeap<Entry<E>>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler { now: 0, seq: 0, heap: BinaryHeap::new() }
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn schedule_at(&mut self, time: Micros, event: E) -> Result<(), SimError> {
        if time < self.now {
            return Err(SimError::PastEvent { now: self.now, at: time });
        }
        self.heap.push(Entry { time, seq: self.seq, event });
        self.seq += 1;
        Ok(())
    }

    pub fn schedule_in(&mut self, delay: Micros, event: E) -> Result<(), SimError> {
        self.schedule_at(self.now + delay, event)
    }

    /// Runs every event with time ≤ `t_end` and returns how many ran. The
    /// clock ends at `t_end` unless a handler fails.
    pub fn run_until<F>(&mut self, t_end: Micros, mut handler: F) -> Result<u64, SimError>
    where
        F: FnMut(&mut Self, E) -> Result<(), SimError>,
    {
        let mut count = 0;
        while self.heap.peek().is_some_and(|e| e.time <= t_end) {
            let Entry { time, event, .. } = self.heap.pop().expect("peeked");
            self.now = time;
            handler(self, event)?;
            count += 1;
        }
        self.now = self.now.max(t_end);
        Ok(count)
    }
}
