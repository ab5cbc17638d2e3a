//! Level frames: per-side running sums of aggregated polarity.

use crate::aer::Side;

use super::{AggregatedEvent, PipelineError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelFrame {
    pub width: u16,
    pub height: u16,
    pub levels: Vec<i32>,
}

impl LevelFrame {
    pub fn new(width: u16, height: u16) -> Self {
        LevelFrame {
            width,
            height,
            levels: vec![0; usize::from(width) * usize::from(height)],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.levels[y * usize::from(self.width) + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[i32] {
        let w = usize::from(self.width);
        &self.levels[y * w..(y + 1) * w]
    }

    pub fn set(&mut self, x: usize, y: usize, v: i32) {
        let w = usize::from(self.width);
        self.levels[y * w + x] = v;
    }
}

/// Left and right level frames, indexed by [`Side::index`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StereoLevels {
    pub frames: [LevelFrame; 2],
}

impl StereoLevels {
    pub fn new(width: u16, height: u16) -> Self {
        StereoLevels {
            frames: [LevelFrame::new(width, height), LevelFrame::new(width, height)],
        }
    }

    pub fn left(&self) -> &LevelFrame {
        &self.frames[0]
    }

    pub fn right(&self) -> &LevelFrame {
        &self.frames[1]
    }

    pub fn side(&self, side: Side) -> &LevelFrame {
        &self.frames[side.index()]
    }
}

/// Level update produced for every aggregated event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelEvent {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub level: i32,
    pub side: Side,
}

/// Adds `a.polarity_sum` into its side's frame and reports the new level.
pub fn level_apply(frames: &mut StereoLevels, a: &AggregatedEvent) -> Result<LevelEvent, PipelineError> {
    let frame = &mut frames.frames[a.side.index()];
    if a.x >= frame.width || a.y >= frame.height {
        return Err(PipelineError::CoordinateOutOfBounds { x: a.x, y: a.y });
    }
    let idx = usize::from(a.y) * usize::from(frame.width) + usize::from(a.x);
    let level = frame.levels[idx].wrapping_add(a.polarity_sum);
    frame.levels[idx] = level;
    Ok(LevelEvent { t_us: a.t_us, x: a.x, y: a.y, level, side: a.side })
}
