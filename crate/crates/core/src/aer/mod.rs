//! Address-event types and ordered stream containers.
//!
//! Every stream in this crate is kept in one canonical order: timestamps are
//! nondecreasing and simultaneous events are ordered Left before Right, then
//! by row, then by column. All execution variants rely on that order to
//! produce identical outputs.

mod io;
mod packing;

pub use io::{read_stream, read_text, write_stream, write_text, StreamIoError, HEADER_LEN, MAGIC, RECORD_LEN, VERSION};
pub use packing::{pack_event, unpack_event, PackError, Unpacked, WirePacket, WirePayload, MAX_WIRE_Y};

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest timestamp (exclusive) accepted at runtime; wire packets carry one 32-bit word.
pub const MAX_RUNTIME_T_US: u64 = 1 << 32;

/// Which camera an event came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn from_bit(bit: u32) -> Side {
        if bit == 0 {
            Side::Left
        } else {
            Side::Right
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "L",
            Side::Right => "R",
        })
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L" | "l" | "left" | "Left" => Ok(Side::Left),
            "R" | "r" | "right" | "Right" => Ok(Side::Right),
            other => Err(format!("unknown side '{other}'")),
        }
    }
}

/// Side recorded in a stream header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamSide {
    Left,
    Right,
    Mixed,
}

impl StreamSide {
    pub fn admits(self, side: Side) -> bool {
        matches!(
            (self, side),
            (StreamSide::Mixed, _) | (StreamSide::Left, Side::Left) | (StreamSide::Right, Side::Right)
        )
    }
}

impl From<Side> for StreamSide {
    fn from(side: Side) -> Self {
        match side {
            Side::Left => StreamSide::Left,
            Side::Right => StreamSide::Right,
        }
    }
}

impl fmt::Display for StreamSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamSide::Left => "left",
            StreamSide::Right => "right",
            StreamSide::Mixed => "mixed",
        })
    }
}

impl FromStr for StreamSide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(StreamSide::Left),
            "right" | "r" => Ok(StreamSide::Right),
            "mixed" | "m" => Ok(StreamSide::Mixed),
            other => Err(format!("unknown stream side '{other}'")),
        }
    }
}

/// One sensor firing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolarityEvent {
    /// Microseconds since stream start.
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    /// Exactly -1 or +1.
    pub polarity: i8,
    pub side: Side,
}

impl PolarityEvent {
    pub fn new(t_us: u64, x: u16, y: u16, polarity: i8, side: Side) -> Self {
        PolarityEvent { t_us, x, y, polarity, side }
    }

    /// Sort key of the canonical stream order.
    #[inline]
    pub fn order_key(&self) -> (u64, Side, u16, u16) {
        (self.t_us, self.side, self.y, self.x)
    }
}

/// Compares two events by canonical stream order.
pub fn canonical_cmp(a: &PolarityEvent, b: &PolarityEvent) -> Ordering {
    a.order_key().cmp(&b.order_key())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: u16,
    pub height: u16,
    pub side: StreamSide,
}

/// A header plus its events in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub header: StreamHeader,
    pub events: Vec<PolarityEvent>,
}

impl EventStream {
    pub fn new(width: u16, height: u16, side: StreamSide) -> Self {
        EventStream {
            header: StreamHeader { width, height, side },
            events: Vec::new(),
        }
    }

    pub fn with_events(header: StreamHeader, events: Vec<PolarityEvent>) -> Self {
        EventStream { header, events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Sorts events into canonical order (stable, so bursts keep their relative order).
    pub fn sort_canonical(&mut self) {
        self.events.sort_by(canonical_cmp);
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate_stream(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    OutOfOrder,
    CoordinateOutOfBounds,
    BadPolarity,
    SideMismatch,
    TimestampOverflow,
}

/// First rule broken by a stream, with the offending event index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("stream violation {kind:?} at event {index}")]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

/// Reports the first ordering, bounds, polarity, side or timestamp-range violation.
pub fn validate_stream(s: &EventStream) -> Result<(), Violation> {
    let h = &s.header;
    let mut prev: Option<&PolarityEvent> = None;
    for (index, e) in s.events.iter().enumerate() {
        let fail = |kind| Err(Violation { index, kind });
        if let Some(p) = prev {
            if canonical_cmp(p, e) == Ordering::Greater {
                return fail(ViolationKind::OutOfOrder);
            }
        }
        if e.x >= h.width || e.y >= h.height {
            return fail(ViolationKind::CoordinateOutOfBounds);
        }
        if e.polarity != 1 && e.polarity != -1 {
            return fail(ViolationKind::BadPolarity);
        }
        if !h.side.admits(e.side) {
            return fail(ViolationKind::SideMismatch);
        }
        if e.t_us >= MAX_RUNTIME_T_US {
            return fail(ViolationKind::TimestampOverflow);
        }
        prev = Some(e);
    }
    Ok(())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MergeError {
    #[error("stream dimensions differ: left {left:?}, right {right:?}")]
    HeaderMismatch { left: (u16, u16), right: (u16, u16) },
    #[error("{side} input stream is not valid: {violation}")]
    UnorderedInput { side: Side, violation: Violation },
}

/// Interleaves a left and a right stream into one Mixed stream.
///
/// Events are retagged with the side of the input they came from. Inputs must
/// already be canonically ordered; ties at equal timestamps go Left first.
pub fn merge_streams(left: &EventStream, right: &EventStream) -> Result<EventStream, MergeError> {
    let (lh, rh) = (&left.header, &right.header);
    if (lh.width, lh.height) != (rh.width, rh.height) {
        return Err(MergeError::HeaderMismatch {
            left: (lh.width, lh.height),
            right: (rh.width, rh.height),
        });
    }
    let retag = |s: &EventStream, side: Side| -> Result<Vec<PolarityEvent>, MergeError> {
        let mut tagged = EventStream {
            header: StreamHeader { side: side.into(), ..s.header },
            events: s.events.iter().map(|e| PolarityEvent { side, ..*e }).collect(),
        };
        validate_stream(&tagged).map_err(|violation| MergeError::UnorderedInput { side, violation })?;
        Ok(std::mem::take(&mut tagged.events))
    };
    let l = retag(left, Side::Left)?;
    let r = retag(right, Side::Right)?;

    let mut events = Vec::with_capacity(l.len() + r.len());
    let (mut i, mut j) = (0, 0);
    while i < l.len() && j < r.len() {
        if canonical_cmp(&l[i], &r[j]) != Ordering::Greater {
            events.push(l[i]);
            i += 1;
        } else {
            events.push(r[j]);
            j += 1;
        }
    }
    events.extend_from_slice(&l[i..]);
    events.extend_from_slice(&r[j..]);

    Ok(EventStream {
        header: StreamHeader { width: lh.width, height: lh.height, side: StreamSide::Mixed },
        events,
    })
}
