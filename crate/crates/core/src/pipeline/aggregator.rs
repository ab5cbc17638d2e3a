//! Polarity aggregation with a per-pixel inactivity deadline.
//!
//! Each `(side, x, y)` accumulates polarity while it keeps firing. An entry
//! whose last update is more than `deadline_us` older than the incoming event
//! is removed and emitted before that event is applied.

use std::collections::{BTreeSet, HashMap};

use crate::aer::{PolarityEvent, Side};

use super::PipelineError;

/// Summed polarity of one pixel over its activity window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AggregatedEvent {
    /// Timestamp of the last raw event folded into the window.
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub polarity_sum: i32,
    pub side: Side,
}

impl AggregatedEvent {
    /// Sort key of the flush order.
    pub fn flush_key(&self) -> (u64, Side, u16, u16) {
        (self.t_us, self.side, self.y, self.x)
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    sum: i32,
    last_t: u64,
}

type PixelKey = (Side, u16, u16);

#[derive(Debug, Clone)]
pub struct Aggregator {
    deadline_us: u64,
    entries: HashMap<PixelKey, Entry>,
    // (last_t, side, y, x) of every live entry; its first element is the next to expire.
    expiry: BTreeSet<(u64, Side, u16, u16)>,
    now: u64,
}

impl Aggregator {
    pub fn new(deadline_us: u64) -> Self {
        Aggregator {
            deadline_us,
            entries: HashMap::new(),
            expiry: BTreeSet::new(),
            now: 0,
        }
    }

    pub fn deadline_us(&self) -> u64 {
        self.deadline_us
    }

    /// Number of pixels currently buffered.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flushes expired entries, then folds `e` into its pixel's window.
    pub fn push(&mut self, e: &PolarityEvent) -> Result<Vec<AggregatedEvent>, PipelineError> {
        let mut out = Vec::new();
        self.push_into(e, &mut out)?;
        Ok(out)
    }

    /// Like [`push`](Self::push) but appends flushed aggregates to `out`.
    pub fn push_into(&mut self, e: &PolarityEvent, out: &mut Vec<AggregatedEvent>) -> Result<(), PipelineError> {
        if e.t_us < self.now {
            return Err(PipelineError::OutOfOrderEvent { previous_us: self.now, t_us: e.t_us });
        }
        self.now = e.t_us;
        self.flush_expired(e.t_us, out);

        let key = (e.side, e.x, e.y);
        let polarity = i32::from(e.polarity);
        match self.entries.get_mut(&key) {
            Some(entry) => {
                if entry.last_t != e.t_us {
                    self.expiry.remove(&(entry.last_t, e.side, e.y, e.x));
                    self.expiry.insert((e.t_us, e.side, e.y, e.x));
                    entry.last_t = e.t_us;
                }
                entry.sum += polarity;
            }
            None => {
                self.entries.insert(key, Entry { sum: polarity, last_t: e.t_us });
                self.expiry.insert((e.t_us, e.side, e.y, e.x));
            }
        }
        Ok(())
    }

    fn flush_expired(&mut self, now: u64, out: &mut Vec<AggregatedEvent>) {
        while let Some(&(last_t, side, y, x)) = self.expiry.first() {
            if last_t.saturating_add(self.deadline_us) >= now {
                break;
            }
            self.expiry.pop_first();
            out.push(self.take(side, x, y));
        }
    }

    fn take(&mut self, side: Side, x: u16, y: u16) -> AggregatedEvent {
        let entry = self.entries.remove(&(side, x, y)).expect("expiry index out of sync with buffer");
        AggregatedEvent { t_us: entry.last_t, x, y, polarity_sum: entry.sum, side }
    }

    /// Empties the buffer, emitting every entry in flush order.
    pub fn flush_all(&mut self) -> Vec<AggregatedEvent> {
        let mut out = Vec::with_capacity(self.entries.len());
        self.flush_all_into(&mut out);
        out
    }

    pub fn flush_all_into(&mut self, out: &mut Vec<AggregatedEvent>) {
        while let Some((_, side, y, x)) = self.expiry.pop_first() {
            out.push(self.take(side, x, y));
        }
    }
}
