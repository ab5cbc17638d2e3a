//! Execution strategies for the stereo pipeline.
//!
//! Every variant consumes the same merged stream and must produce output
//! identical to [`run_pipeline_sequential`](crate::pipeline::run_pipeline_sequential):
//!
//! - `Sequential`: aggregator and engine chained directly in-process.
//! - `Simple`: one opaque kernel call per event with a fresh transfer buffer.
//! - `Combined`: both sides packed into 3-word packets, one call per batch.
//! - `Channels`: aggregator and producer on separate workers joined by a
//!   bounded packet FIFO, terminated by a sentinel.

pub mod stage;

use std::fmt;
use std::hint::black_box;
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam::channel::bounded;
use thiserror::Error;

use crate::aer::{pack_event, unpack_event, EventStream, PackError, PolarityEvent, Side, Unpacked, WirePacket, WirePayload};
use crate::pipeline::{check_pipeline_input, AggregatedEvent, DisparityEvent, MatchConfig, PipelineError};

use stage::{run_channel_stage, run_source_stage, AggregatorStage, ProducerStage, Stage};

pub const DEFAULT_BATCH_SIZE: usize = 4096;
pub const DEFAULT_CHANNEL_CAPACITY: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error("channel closed before sentinel ({0})")]
    ChannelClosed(&'static str),
    #[error("invalid runtime configuration: {0}")]
    InvalidConfig(String),
    #[error("worker thread panicked")]
    WorkerPanicked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Sequential,
    Simple,
    Combined,
    Channels,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Sequential, Variant::Simple, Variant::Combined, Variant::Channels];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Sequential => "sequential",
            Variant::Simple => "simple",
            Variant::Combined => "combined",
            Variant::Channels => "channels",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown variant '{s}' (expected sequential|simple|combined|channels)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuntimeConfig {
    pub variant: Variant,
    /// Events per kernel call in `Combined`.
    pub batch_size: usize,
    /// FIFO depth in packets for `Channels`.
    pub channel_capacity: usize,
    pub matching: MatchConfig,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            variant: Variant::Sequential,
            batch_size: DEFAULT_BATCH_SIZE,
            channel_capacity: DEFAULT_CHANNEL_CAPACITY,
            matching: MatchConfig::default(),
        }
    }
}

impl RuntimeConfig {
    pub fn with_variant(self, variant: Variant) -> Self {
        RuntimeConfig { variant, ..self }
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.batch_size == 0 {
            return Err(RuntimeError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.channel_capacity == 0 {
            return Err(RuntimeError::InvalidConfig("channel_capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// Counters for one pipeline stage.
///
/// `busy_time` excludes time blocked on channels in `Channels`; the
/// single-threaded variants interleave both stages, so there it is measured
/// per kernel call (`Simple`, `Combined`) or equals the run time (`Sequential`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageStats {
    pub name: &'static str,
    pub events_in: u64,
    pub events_out: u64,
    pub busy_time: Duration,
    pub wall_time: Duration,
}

impl StageStats {
    pub fn named(name: &'static str) -> Self {
        StageStats { name, events_in: 0, events_out: 0, busy_time: Duration::ZERO, wall_time: Duration::ZERO }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageMetrics {
    pub variant: Variant,
    /// Aggregator first, producer second.
    pub stages: Vec<StageStats>,
    pub sink_event_count: u64,
    pub wall_time: Duration,
    pub throughput_kev_s: f64,
}

impl StageMetrics {
    fn finalize(variant: Variant, stages: Vec<StageStats>, sink_event_count: u64, wall_time: Duration) -> Self {
        let secs = wall_time.as_secs_f64();
        let throughput_kev_s = if secs > 0.0 { sink_event_count as f64 / secs / 1000.0 } else { 0.0 };
        StageMetrics { variant, stages, sink_event_count, wall_time, throughput_kev_s }
    }
}

/// Executes the pipeline under `cfg.variant`. Only this call is timed.
pub fn run(mixed: &EventStream, cfg: &RuntimeConfig) -> Result<(Vec<DisparityEvent>, StageMetrics), RuntimeError> {
    cfg.validate()?;
    check_pipeline_input(mixed, &cfg.matching)?;
    let start = Instant::now();
    let (out, mut stages) = match cfg.variant {
        Variant::Sequential => run_sequential(mixed, &cfg.matching)?,
        Variant::Simple => run_simple(mixed, &cfg.matching)?,
        Variant::Combined => run_combined(mixed, &cfg.matching, cfg.batch_size)?,
        Variant::Channels => run_channels(mixed, &cfg.matching, cfg.channel_capacity)?,
    };
    let wall = start.elapsed();
    for s in &mut stages {
        if s.wall_time.is_zero() {
            s.wall_time = wall;
        }
    }
    let n = out.len() as u64;
    Ok((out, StageMetrics::finalize(cfg.variant, stages, n, wall)))
}

fn run_sequential(mixed: &EventStream, cfg: &MatchConfig) -> Result<(Vec<DisparityEvent>, Vec<StageStats>), RuntimeError> {
    // Counting version of run_pipeline_sequential.
    let h = &mixed.header;
    let mut agg = crate::pipeline::Aggregator::new(cfg.deadline_us);
    let mut engine = crate::pipeline::DisparityEngine::new(h.width, h.height, *cfg);
    let mut scratch: Vec<AggregatedEvent> = Vec::new();
    let mut out = Vec::new();
    let mut aggregated = 0u64;
    let start = Instant::now();
    for e in &mixed.events {
        scratch.clear();
        agg.push_into(e, &mut scratch)?;
        aggregated += scratch.len() as u64;
        for a in &scratch {
            out.extend(engine.on_aggregate(a)?);
        }
    }
    scratch.clear();
    agg.flush_all_into(&mut scratch);
    aggregated += scratch.len() as u64;
    for a in &scratch {
        out.extend(engine.on_aggregate(a)?);
    }
    let elapsed = start.elapsed();
    let stages = vec![
        StageStats { name: "aggregator", events_in: mixed.len() as u64, events_out: aggregated, busy_time: elapsed, wall_time: elapsed },
        StageStats { name: "producer", events_in: aggregated, events_out: out.len() as u64, busy_time: elapsed, wall_time: elapsed },
    ];
    Ok((out, stages))
}

/// Device-side state shared by the single-threaded kernel variants.
struct Kernel {
    aggregator: AggregatorStage,
    producer: ProducerStage,
    stats: [StageStats; 2],
    intermediate: Vec<WirePacket>,
}

impl Kernel {
    fn new(mixed: &EventStream, cfg: &MatchConfig) -> Self {
        Kernel {
            aggregator: AggregatorStage::new(cfg.deadline_us),
            producer: ProducerStage::new(mixed.header.width, mixed.header.height, *cfg),
            stats: [StageStats::named("aggregator"), StageStats::named("producer")],
            intermediate: Vec::new(),
        }
    }

    /// Runs the batch through aggregation, then everything aggregated through
    /// the producer. Stage 2 only depends on stage 1's output order, so this
    /// matches per-event interleaving exactly.
    fn execute(&mut self, batch: &[WirePacket], end_of_stream: bool, out: &mut Vec<DisparityEvent>) -> Result<(), RuntimeError> {
        let t0 = Instant::now();
        self.intermediate.clear();
        for p in batch {
            match unpack_event(p) {
                Unpacked::Event(e) => self.aggregator.process(e, &mut self.intermediate)?,
                Unpacked::Sentinel => break,
            }
            self.stats[0].events_in += 1;
        }
        if end_of_stream {
            self.aggregator.finish(&mut self.intermediate)?;
        }
        let t1 = Instant::now();
        let before = out.len();
        for p in &self.intermediate {
            if let Unpacked::Event(e) = unpack_event(p) {
                self.producer.process(e, out)?;
            }
        }
        let n_mid = self.intermediate.len() as u64;
        self.stats[0].events_out += n_mid;
        self.stats[1].events_in += n_mid;
        self.stats[1].events_out += (out.len() - before) as u64;
        self.stats[0].busy_time += t1 - t0;
        self.stats[1].busy_time += t1.elapsed();
        Ok(())
    }
}

/// One call per event. The event travels in a freshly allocated 4-int buffer
/// with the camera side passed separately, and results come back in a fresh
/// output buffer, as with a per-event device invocation.
#[inline(never)]
fn invoke_simple(kernel: &mut Kernel, transfer: Vec<i32>, src: Side, end_of_stream: bool) -> Result<Vec<DisparityEvent>, RuntimeError> {
    let mut out = Vec::new();
    let batch: Vec<WirePacket> = transfer
        .chunks_exact(4)
        .map(|w| {
            pack_event(&WirePayload {
                t_us: w[0] as u32,
                x: w[1] as u16,
                y: w[2] as u16,
                side: src,
                value: w[3],
            })
        })
        .collect::<Result<_, _>>()?;
    kernel.execute(&batch, end_of_stream, &mut out)?;
    Ok(out)
}

fn run_simple(mixed: &EventStream, cfg: &MatchConfig) -> Result<(Vec<DisparityEvent>, Vec<StageStats>), RuntimeError> {
    let mut kernel = Kernel::new(mixed, cfg);
    let mut out = Vec::new();
    for e in &mixed.events {
        let transfer = black_box(vec![e.t_us as u32 as i32, i32::from(e.x), i32::from(e.y), i32::from(e.polarity)]);
        out.extend(invoke_simple(&mut kernel, transfer, e.side, false)?);
    }
    out.extend(invoke_simple(&mut kernel, Vec::new(), Side::Left, true)?);
    Ok((out, kernel.stats.into()))
}

fn pack_stream(events: &[PolarityEvent]) -> Result<Vec<WirePacket>, RuntimeError> {
    events
        .iter()
        .map(|e| Ok(pack_event(&WirePayload::from_event(e)?)?))
        .collect()
}

#[inline(never)]
fn invoke_combined(kernel: &mut Kernel, batch: &[WirePacket], end_of_stream: bool) -> Result<Vec<DisparityEvent>, RuntimeError> {
    let mut out = Vec::new();
    kernel.execute(batch, end_of_stream, &mut out)?;
    Ok(out)
}

fn run_combined(mixed: &EventStream, cfg: &MatchConfig, batch_size: usize) -> Result<(Vec<DisparityEvent>, Vec<StageStats>), RuntimeError> {
    let mut kernel = Kernel::new(mixed, cfg);
    let mut out = Vec::new();
    let n_batches = mixed.events.len().div_ceil(batch_size).max(1);
    for (i, chunk) in mixed.events.chunks(batch_size).enumerate() {
        let batch = black_box(pack_stream(chunk)?);
        out.extend(invoke_combined(&mut kernel, &batch, i + 1 == n_batches)?);
    }
    if mixed.events.is_empty() {
        out.extend(invoke_combined(&mut kernel, &[], true)?);
    }
    Ok((out, kernel.stats.into()))
}

fn run_channels(mixed: &EventStream, cfg: &MatchConfig, capacity: usize) -> Result<(Vec<DisparityEvent>, Vec<StageStats>), RuntimeError> {
    let packets = pack_stream(&mixed.events)?;
    let (tx, rx) = bounded::<WirePacket>(capacity);
    let (w, h) = (mixed.header.width, mixed.header.height);
    let (r1, r2) = thread::scope(|s| {
        let aggregator = s.spawn(move || {
            let tx = tx;
            run_source_stage(AggregatorStage::new(cfg.deadline_us), &packets, &tx)
        });
        let producer = s.spawn(move || {
            let rx = rx;
            let mut out = Vec::new();
            run_channel_stage(ProducerStage::new(w, h, *cfg), &rx, |d| {
                out.push(d);
                Ok(())
            })
            .map(|stats| (out, stats))
        });
        (
            aggregator.join().unwrap_or(Err(RuntimeError::WorkerPanicked)),
            producer.join().unwrap_or(Err(RuntimeError::WorkerPanicked)),
        )
    });
    match (r1, r2) {
        (Ok(s1), Ok((out, s2))) => Ok((out, vec![s1, s2])),
        // A failing stage closes the channel; report the root cause, not the hang-up it caused.
        (Err(e), Err(RuntimeError::ChannelClosed(_))) | (Err(RuntimeError::ChannelClosed(_)), Err(e)) => Err(e),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}
