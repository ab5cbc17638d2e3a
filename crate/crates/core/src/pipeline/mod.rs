//! Event-driven stereo disparity: polarity aggregation, level integration and
//! SAD matching, chained in stream order.
//!
//! ```text
//! raw events -> Aggregator -> AggregatedEvent -> level_apply -> LevelEvent -> matcher -> DisparityEvent
//! ```
//!
//! Both sides feed the same [`StereoLevels`]; only left events trigger a match.

mod aggregator;
mod dsp_io;
mod level;
mod matching;

pub use aggregator::{AggregatedEvent, Aggregator};
pub use dsp_io::{disparity_bytes, read_disparities, read_disparities_text, write_disparities, write_disparities_text, DspIoError, DSP_MAGIC, DSP_RECORD_LEN};
pub use level::{level_apply, LevelEvent, LevelFrame, StereoLevels};
pub use matching::{disparity_on_level_event, sad, DisparityEvent};

use thiserror::Error;

use crate::aer::{validate_stream, EventStream, PolarityEvent, StreamSide, Violation};

pub const DEFAULT_WINDOW_RADIUS: u16 = 3;
pub const DEFAULT_D_MAX: u16 = 63;
pub const DEFAULT_DEADLINE_US: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("event at {t_us} us precedes previously pushed {previous_us} us")]
    OutOfOrderEvent { previous_us: u64, t_us: u64 },
    #[error("coordinate ({x}, {y}) out of bounds")]
    CoordinateOutOfBounds { x: u16, y: u16 },
    #[error("invalid match configuration: {0}")]
    InvalidConfig(String),
    #[error("pipeline input must be a mixed stream, got {0}")]
    NotMixed(StreamSide),
    #[error("invalid input stream: {0}")]
    InvalidStream(Violation),
}

/// Window radius `B`, largest tested disparity and aggregation deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchConfig {
    pub window_radius: u16,
    pub d_max: u16,
    pub deadline_us: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            window_radius: DEFAULT_WINDOW_RADIUS,
            d_max: DEFAULT_D_MAX,
            deadline_us: DEFAULT_DEADLINE_US,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self, width: u16, height: u16) -> Result<(), PipelineError> {
        if self.d_max >= width {
            return Err(PipelineError::InvalidConfig(format!("d_max {} must be below width {width}", self.d_max)));
        }
        let span = 2 * u32::from(self.window_radius) + 1;
        if span > u32::from(width.min(height)) {
            return Err(PipelineError::InvalidConfig(format!(
                "window {span}x{span} does not fit a {width}x{height} frame"
            )));
        }
        Ok(())
    }
}

/// Level frames plus matcher: everything downstream of aggregation.
#[derive(Debug, Clone)]
pub struct DisparityEngine {
    levels: StereoLevels,
    cfg: MatchConfig,
}

impl DisparityEngine {
    pub fn new(width: u16, height: u16, cfg: MatchConfig) -> Self {
        DisparityEngine { levels: StereoLevels::new(width, height), cfg }
    }

    /// Integrates one aggregate and, for left events, matches it.
    #[inline]
    pub fn on_aggregate(&mut self, a: &AggregatedEvent) -> Result<Option<DisparityEvent>, PipelineError> {
        let le = level_apply(&mut self.levels, a)?;
        disparity_on_level_event(&self.levels, &le, &self.cfg)
    }

    pub fn levels(&self) -> &StereoLevels {
        &self.levels
    }
}

/// Aggregator and engine chained directly.
#[derive(Debug, Clone)]
pub struct StereoPipeline {
    aggregator: Aggregator,
    engine: DisparityEngine,
    scratch: Vec<AggregatedEvent>,
}

impl StereoPipeline {
    pub fn new(width: u16, height: u16, cfg: MatchConfig) -> Result<Self, PipelineError> {
        cfg.validate(width, height)?;
        Ok(StereoPipeline {
            aggregator: Aggregator::new(cfg.deadline_us),
            engine: DisparityEngine::new(width, height, cfg),
            scratch: Vec::new(),
        })
    }

    pub fn push(&mut self, e: &PolarityEvent, out: &mut Vec<DisparityEvent>) -> Result<(), PipelineError> {
        self.scratch.clear();
        self.aggregator.push_into(e, &mut self.scratch)?;
        for a in &self.scratch {
            out.extend(self.engine.on_aggregate(a)?);
        }
        Ok(())
    }

    /// End of stream: drains the aggregator through the engine.
    pub fn finish(&mut self, out: &mut Vec<DisparityEvent>) -> Result<(), PipelineError> {
        self.scratch.clear();
        self.aggregator.flush_all_into(&mut self.scratch);
        for a in &self.scratch {
            out.extend(self.engine.on_aggregate(a)?);
        }
        Ok(())
    }

    pub fn levels(&self) -> &StereoLevels {
        self.engine.levels()
    }
}

/// Checks the preconditions shared by every execution variant.
pub fn check_pipeline_input(mixed: &EventStream, cfg: &MatchConfig) -> Result<(), PipelineError> {
    if mixed.header.side != StreamSide::Mixed {
        return Err(PipelineError::NotMixed(mixed.header.side));
    }
    validate_stream(mixed).map_err(PipelineError::InvalidStream)?;
    cfg.validate(mixed.header.width, mixed.header.height)
}

/// Reference execution: every event through aggregation, levels and matching
/// in stream order, then a final flush.
pub fn run_pipeline_sequential(mixed: &EventStream, cfg: &MatchConfig) -> Result<Vec<DisparityEvent>, PipelineError> {
    check_pipeline_input(mixed, cfg)?;
    let mut p = StereoPipeline::new(mixed.header.width, mixed.header.height, *cfg)?;
    let mut out = Vec::new();
    for e in &mixed.events {
        p.push(e, &mut out)?;
    }
    p.finish(&mut out)?;
    Ok(out)
}
