//! Pending-event set ordered by time, then by insertion.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Arrival(usize),
    Departure,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the earliest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
pub struct EventCalendar {
    heap: BinaryHeap<Entry>,
    seq: u64,
    last: f64,
}

impl EventCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: f64, event: Event) {
        debug_assert!(
            time >= self.last,
            "event at {time} scheduled before now {}",
            self.last
        );
        self.heap.push(Entry {
            time,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(f64, Event)> {
        let e = self.heap.pop()?;
        debug_assert!(
            e.time >= self.last,
            "calendar went back from {} to {}",
            self.last,
            e.time
        );
        self.last = e.time;
        Some((e.time, e.event))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_then_insertion_order() {
        let mut c = EventCalendar::new();
        c.schedule(2.0, Event::Departure);
        c.schedule(1.0, Event::Arrival(0));
        c.schedule(1.0, Event::Arrival(1));
        c.schedule(0.5, Event::Arrival(2));
        let order: Vec<_> = std::iter::from_fn(|| c.pop()).collect();
        assert_eq!(
            order,
            vec![
                (0.5, Event::Arrival(2)),
                (1.0, Event::Arrival(0)),
                (1.0, Event::Arrival(1)),
                (2.0, Event::Departure)
            ]
        );
        assert!(c.is_empty());
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "scheduled before now")]
    fn scheduling_in_the_past_panics() {
        let mut c = EventCalendar::new();
        c.schedule(1.0, Event::Departure);
        c.pop();
        c.schedule(0.5, Event::Departure);
    }
}
