//! Three-word packet layout shared by the batched and channelized variants.
//!
//! ```text
//! word0  t_us (low 32 bits)
//! word1  side:1 | y:15 | x:16
//! word2  signed payload (raw polarity, aggregated sum, ...)
//! ```
//!
//! The all-ones pattern is reserved as the end-of-stream sentinel.

use thiserror::Error;

use super::{PolarityEvent, Side, MAX_RUNTIME_T_US};

/// Exclusive upper bound on `y`; `y = 0x7FFF` with `x = 0xFFFF` on the right
/// side would collide with the sentinel.
pub const MAX_WIRE_Y: u16 = 0x7FFF;

const SENTINEL_WORD: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WirePacket(pub [u32; 3]);

impl WirePacket {
    pub const SENTINEL: WirePacket = WirePacket([SENTINEL_WORD; 3]);

    pub fn sentinel() -> Self {
        Self::SENTINEL
    }

    #[inline]
    pub fn is_sentinel(&self) -> bool {
        self.0 == [SENTINEL_WORD; 3]
    }

    pub fn words(&self) -> [u32; 3] {
        self.0
    }
}

/// Side-tagged event content carried by a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WirePayload {
    pub t_us: u32,
    pub x: u16,
    pub y: u16,
    pub side: Side,
    pub value: i32,
}

impl WirePayload {
    pub fn from_event(e: &PolarityEvent) -> Result<Self, PackError> {
        if e.t_us >= MAX_RUNTIME_T_US {
            return Err(PackError::TimestampOverflow(e.t_us));
        }
        Ok(WirePayload {
            t_us: e.t_us as u32,
            x: e.x,
            y: e.y,
            side: e.side,
            value: i32::from(e.polarity),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unpacked {
    Event(WirePayload),
    Sentinel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PackError {
    #[error("y = {0} does not fit the 15-bit packet field")]
    CoordinateOverflow(u16),
    #[error("timestamp {0} us does not fit 32 bits")]
    TimestampOverflow(u64),
}

#[inline]
pub fn pack_event(p: &WirePayload) -> Result<WirePacket, PackError> {
    if p.y >= MAX_WIRE_Y {
        return Err(PackError::CoordinateOverflow(p.y));
    }
    let side_bit = (p.side == Side::Right) as u32;
    let word1 = (side_bit << 31) | (u32::from(p.y) << 16) | u32::from(p.x);
    Ok(WirePacket([p.t_us, word1, p.value as u32]))
}

#[inline]
pub fn unpack_event(p: &WirePacket) -> Unpacked {
    if p.is_sentinel() {
        return Unpacked::Sentinel;
    }
    let [t, w1, w2] = p.0;
    Unpacked::Event(WirePayload {
        t_us: t,
        x: (w1 & 0xFFFF) as u16,
        y: ((w1 >> 16) & 0x7FFF) as u16,
        side: Side::from_bit(w1 >> 31),
        value: w2 as i32,
    })
}
