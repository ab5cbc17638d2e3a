//! Sink throughput, event-rate timelines, variant comparison and accuracy
//! against simulator ground truth.
//!
//! Reports are CSV with one header line. The resolved configuration and a
//! machine descriptor precede the header as `# key = value` comment lines.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::time::Duration;

use thiserror::Error;

use crate::aer::EventStream;
use crate::config::FlatConfig;
use crate::pipeline::DisparityEvent;
use crate::runtime::{run, RuntimeConfig, RuntimeError, StageMetrics, Variant};
use crate::sim::GroundTruthRecord;

pub const QVGA_WIDTH: u32 = 320;
pub const QVGA_HEIGHT: u32 = 240;
pub const DEFAULT_REPEATS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceViolation {
    pub variant: Variant,
    /// Position of the first record that differs (or the shorter length).
    pub index: usize,
    pub expected: Option<DisparityEvent>,
    pub actual: Option<DisparityEvent>,
}

impl std::fmt::Display for EquivalenceViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} diverges from sequential at record {}: expected {:?}, got {:?}", self.variant, self.index, self.expected, self.actual)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("zero wall time with {0} sink events")]
    ZeroDuration(u64),
    #[error("{0}")]
    EquivalenceViolation(Box<EquivalenceViolation>),
    #[error("{count} disparity events without ground truth (first at t={t_us} x={x} y={y})")]
    MissingGroundTruth { count: usize, t_us: u64, x: u16, y: u16 },
    #[error("non-positive input: {0}")]
    NonPositiveInput(&'static str),
    #[error("bin width must be >= 1 us")]
    ZeroBinWidth,
    #[error("repeat count must be >= 1")]
    ZeroRepeats,
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputEntry {
    pub variant: String,
    pub events: u64,
    pub seconds: f64,
    pub kev_per_s: f64,
}

impl ThroughputEntry {
    pub fn new(variant: impl Into<String>, events: u64, seconds: f64) -> Result<Self, BenchError> {
        let kev_per_s = if events == 0 {
            0.0
        } else if seconds > 0.0 {
            events as f64 / seconds / 1000.0
        } else {
            return Err(BenchError::ZeroDuration(events));
        };
        Ok(ThroughputEntry { variant: variant.into(), events, seconds, kev_per_s })
    }
}

/// keV/s at the sink for one finished run.
pub fn measure_throughput(m: &StageMetrics) -> Result<ThroughputEntry, BenchError> {
    ThroughputEntry::new(m.variant.as_str(), m.sink_event_count, m.wall_time.as_secs_f64())
}

pub fn machine_descriptor() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{}-{} {} threads", std::env::consts::OS, std::env::consts::ARCH, threads)
}

/// Key/value view of a runtime configuration for report headers.
pub fn runtime_config_echo(cfg: &RuntimeConfig) -> FlatConfig {
    let mut c = FlatConfig::new();
    c.set("variant", cfg.variant.as_str());
    c.set("batch_size", cfg.batch_size.to_string());
    c.set("channel_capacity", cfg.channel_capacity.to_string());
    c.set("window_radius", cfg.matching.window_radius.to_string());
    c.set("d_max", cfg.matching.d_max.to_string());
    c.set("deadline_us", cfg.matching.deadline_us.to_string());
    c
}

fn comment_block(out: &mut String, machine: Option<&str>, echo: &FlatConfig) {
    if let Some(m) = machine {
        let _ = writeln!(out, "# machine = {m}");
    }
    for line in echo.to_string().lines() {
        let _ = writeln!(out, "# {line}");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub entries: Vec<ThroughputEntry>,
    pub machine: String,
    pub config_echo: FlatConfig,
}

impl ThroughputReport {
    pub fn entry(&self, variant: &str) -> Option<&ThroughputEntry> {
        self.entries.iter().find(|e| e.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        comment_block(&mut s, Some(&self.machine), &self.config_echo);
        s.push_str("variant,events,seconds,kev_per_s\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{:.9},{:.3}", e.variant, e.events, e.seconds, e.kev_per_s);
        }
        s
    }
}

/// First position where `actual` departs from `reference`.
pub fn check_equivalence(variant: Variant, reference: &[DisparityEvent], actual: &[DisparityEvent]) -> Result<(), EquivalenceViolation> {
    let n = reference.len().max(actual.len());
    match (0..n).find(|&i| reference.get(i) != actual.get(i)) {
        None => Ok(()),
        Some(index) => Err(EquivalenceViolation {
            variant,
            index,
            expected: reference.get(index).copied(),
            actual: actual.get(index).copied(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantComparison {
    pub report: ThroughputReport,
    /// Sequential output, which every other variant matched.
    pub reference: Vec<DisparityEvent>,
}

/// Runs every variant `repeats` times on `mixed` and keeps each one's fastest
/// run. Every run's output must equal the Sequential output; the first
/// mismatch aborts the comparison so no throughput is reported for it.
pub fn compare_variants(mixed: &EventStream, base: &RuntimeConfig, repeats: usize) -> Result<VariantComparison, BenchError> {
    if repeats == 0 {
        return Err(BenchError::ZeroRepeats);
    }
    let mut reference: Option<Vec<DisparityEvent>> = None;
    let mut entries = Vec::new();
    for v in Variant::ALL {
        let cfg = base.with_variant(v);
        let mut best: Option<Duration> = None;
        let mut sink = 0;
        for _ in 0..repeats {
            let (out, m) = run(mixed, &cfg)?;
            match &reference {
                None => reference = Some(out),
                Some(r) => check_equivalence(v, r, &out).map_err(|e| BenchError::EquivalenceViolation(Box::new(e)))?,
            }
            sink = m.sink_event_count;
            best = Some(best.map_or(m.wall_time, |b| b.min(m.wall_time)));
        }
        entries.push(ThroughputEntry::new(v.as_str(), sink, best.unwrap_or_default().as_secs_f64())?);
    }
    let mut echo = runtime_config_echo(base);
    echo.set("repeats", repeats.to_string());
    echo.set("variant", "all");
    Ok(VariantComparison {
        report: ThroughputReport { entries, machine: machine_descriptor(), config_echo: echo },
        reference: reference.unwrap_or_default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBin {
    pub t_start_us: u64,
    pub count: u64,
    pub events_per_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTimeline {
    pub bin_width_us: u64,
    pub bins: Vec<RateBin>,
}

impl RateTimeline {
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn peak_events_per_s(&self) -> f64 {
        self.bins.iter().map(|b| b.events_per_s).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# bin_width_us = {}\nt_start_us,count,events_per_s\n", self.bin_width_us);
        for b in &self.bins {
            let _ = writeln!(s, "{},{},{:.3}", b.t_start_us, b.count, b.events_per_s);
        }
        s
    }
}

/// Event counts per `bin_width_us` window from t = 0 to the last timestamp.
/// Bins with no events are kept so the time axis is contiguous.
pub fn event_rate_timeline(s: &EventStream, bin_width_us: u64) -> Result<RateTimeline, BenchError> {
    if bin_width_us == 0 {
        return Err(BenchError::ZeroBinWidth);
    }
    let Some(last) = s.events.iter().map(|e| e.t_us).max() else {
        return Ok(RateTimeline { bin_width_us, bins: Vec::new() });
    };
    let mut counts = vec![0u64; (last / bin_width_us) as usize + 1];
    for e in &s.events {
        counts[(e.t_us / bin_width_us) as usize] += 1;
    }
    let secs = bin_width_us as f64 * 1e-6;
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| RateBin { t_start_us: i as u64 * bin_width_us, count, events_per_s: count as f64 / secs })
        .collect();
    Ok(RateTimeline { bin_width_us, bins })
}

/// Pixel rate of a QVGA frame camera at `fps`.
pub fn qvga_frame_baseline(fps: f64) -> Result<f64, BenchError> {
    if !(fps > 0.0) {
        return Err(BenchError::NonPositiveInput("fps"));
    }
    Ok(f64::from(QVGA_WIDTH) * f64::from(QVGA_HEIGHT) * fps)
}

/// Frame rate bound of a frame camera: exposure plus readout over the link.
pub fn frame_camera_fps(t_exp_s: f64, width: u32, height: u32, bpp: u32, bw_bits_per_s: f64) -> Result<f64, BenchError> {
    if !(t_exp_s >= 0.0) {
        return Err(BenchError::NonPositiveInput("t_exp_s"));
    }
    if width == 0 || height == 0 || bpp == 0 {
        return Err(BenchError::NonPositiveInput("frame size"));
    }
    if !(bw_bits_per_s > 0.0) {
        return Err(BenchError::NonPositiveInput("bandwidth"));
    }
    let readout = f64::from(width) * f64::from(height) * f64::from(bpp) / bw_bits_per_s;
    let period = t_exp_s + readout;
    Ok(1.0 / period)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub matched: usize,
    /// Disparity events with no ground truth at or before their timestamp.
    pub unmatched: usize,
    pub tolerance_px: u16,
    pub mean_abs_error_px: f64,
    /// Fraction of matched events within `tolerance_px` of the truth.
    pub within_tolerance_fraction: f64,
    /// Matched events per true disparity.
    pub histogram: BTreeMap<u16, usize>,
}

impl AccuracyReport {
    pub fn to_csv(&self, echo: &FlatConfig) -> String {
        let mut s = String::new();
        comment_block(&mut s, None, echo);
        s.push_str("matched,mae_px,within_1px\n");
        let _ = writeln!(s, "{},{:.6},{:.6}", self.matched, self.mean_abs_error_px, self.within_tolerance_fraction);
        s
    }
}

/// Joins each disparity event to the ground-truth record at the same pixel
/// with the largest timestamp not after the event, then scores the matches.
///
/// Fails with `MissingGroundTruth` when more than `max_unmatched` events find
/// no record. Integer accumulation keeps the result independent of input order.
pub fn evaluate_accuracy(
    disparities: &[DisparityEvent],
    gt: &[GroundTruthRecord],
    tolerance_px: u16,
    max_unmatched: usize,
) -> Result<AccuracyReport, BenchError> {
    let mut by_pixel: HashMap<(u16, u16), Vec<(u64, u16)>> = HashMap::new();
    for g in gt {
        by_pixel.entry((g.x, g.y)).or_default().push((g.t_us, g.disparity_px));
    }
    for v in by_pixel.values_mut() {
        v.sort_unstable();
    }

    let mut matched = 0usize;
    let mut abs_sum = 0u64;
    let mut within = 0usize;
    let mut histogram = BTreeMap::new();
    let mut missing: Option<(u64, u16, u16)> = None;
    let mut unmatched = 0usize;
    for d in disparities {
        let hit = by_pixel.get(&(d.x, d.y)).and_then(|recs| {
            // Last record with t <= event t; equal timestamps resolve to the largest disparity.
            let n = recs.partition_point(|&(t, _)| t <= d.t_us);
            n.checked_sub(1).map(|i| recs[i].1)
        });
        match hit {
            Some(truth) => {
                let err = d.disparity.abs_diff(truth);
                matched += 1;
                abs_sum += u64::from(err);
                within += usize::from(err <= tolerance_px);
                *histogram.entry(truth).or_insert(0) += 1;
            }
            None => {
                unmatched += 1;
                let key = (d.t_us, d.x, d.y);
                missing = Some(missing.map_or(key, |m| m.min(key)));
            }
        }
    }
    if unmatched > max_unmatched {
        let (t_us, x, y) = missing.unwrap_or_default();
        return Err(BenchError::MissingGroundTruth { count: unmatched, t_us, x, y });
    }
    let (mae, frac) = if matched == 0 { (0.0, 0.0) } else { (abs_sum as f64 / matched as f64, within as f64 / matched as f64) };
    Ok(AccuracyReport { matched, unmatched, tolerance_px, mean_abs_error_px: mae, within_tolerance_fraction: frac, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aer::{PolarityEvent, Side, StreamSide};

    fn rel_eq(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1e-300)
    }

    #[test]
    fn throughput_arithmetic() {
        assert!(rel_eq(ThroughputEntry::new("x", 1000, 0.02).unwrap().kev_per_s, 50.0));
        assert!(rel_eq(ThroughputEntry::new("x", 900_000, 2.0).unwrap().kev_per_s, 450.0));
        assert_eq!(ThroughputEntry::new("x", 0, 0.5).unwrap().kev_per_s, 0.0);
        assert_eq!(ThroughputEntry::new("x", 3, 0.0), Err(BenchError::ZeroDuration(3)));
    }

    #[test]
    fn frame_formulas() {
        assert!(rel_eq(qvga_frame_baseline(100.0).unwrap(), 7.68e6));
        assert!(rel_eq(qvga_frame_baseline(1.0).unwrap(), 76_800.0));
        assert!(qvga_frame_baseline(0.0).is_err());
        assert!(rel_eq(frame_camera_fps(0.0, 320, 240, 8, 6.144e6).unwrap(), 10.0));
        assert!(rel_eq(frame_camera_fps(0.01, 320, 240, 8, 614.4e6).unwrap(), 1.0 / 0.011));
        assert!((frame_camera_fps(0.02, 320, 240, 8, 1e15).unwrap() - 50.0).abs() < 1e-5);
        assert!(frame_camera_fps(0.01, 0, 240, 8, 1e6).is_err());
        assert!(frame_camera_fps(0.01, 320, 240, 8, 0.0).is_err());
    }

    fn stream_at(ts: &[u64]) -> EventStream {
        let mut s = EventStream::new(8, 8, StreamSide::Mixed);
        s.events = ts.iter().map(|&t| PolarityEvent::new(t, 1, 1, 1, Side::Left)).collect();
        s
    }

    #[test]
    fn timeline_examples() {
        let tl = event_rate_timeline(&stream_at(&[0; 10]), 1000).unwrap();
        assert_eq!(tl.bins.len(), 1);
        assert_eq!(tl.bins[0].count, 10);
        assert!(rel_eq(tl.bins[0].events_per_s, 1e4));

        let ts: Vec<u64> = (0..10_000).map(|i| i * 100).collect();
        let tl = event_rate_timeline(&stream_at(&ts), 10_000).unwrap();
        assert_eq!(tl.bins.len(), 100);
        assert!(tl.bins.iter().all(|b| b.count == 100));

        assert!(event_rate_timeline(&stream_at(&[]), 10).unwrap().bins.is_empty());
        assert_eq!(event_rate_timeline(&stream_at(&[1]), 0), Err(BenchError::ZeroBinWidth));
    }

    #[test]
    fn timeline_keeps_empty_bins() {
        let tl = event_rate_timeline(&stream_at(&[0, 35]), 10).unwrap();
        let counts: Vec<u64> = tl.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, [1, 0, 0, 1]);
        assert!(tl.to_csv().contains("t_start_us,count,events_per_s\n0,1,100000.000\n10,0,0.000\n"));
    }

    fn de(t: u64, x: u16, d: u16) -> DisparityEvent {
        DisparityEvent { t_us: t, x, y: 0, disparity: d, sad_score: 0 }
    }

    fn gt(t: u64, x: u16, d: u16) -> GroundTruthRecord {
        GroundTruthRecord { t_us: t, x, y: 0, disparity_px: d, depth_m: 1.0 }
    }

    #[test]
    fn accuracy_exact_and_offset() {
        let g = vec![gt(10, 1, 5), gt(10, 2, 7)];
        let r = evaluate_accuracy(&[de(10, 1, 5), de(10, 2, 7)], &g, 1, 0).unwrap();
        assert_eq!((r.matched, r.mean_abs_error_px, r.within_tolerance_fraction), (2, 0.0, 1.0));
        let r = evaluate_accuracy(&[de(10, 1, 7), de(10, 2, 5)], &g, 1, 0).unwrap();
        assert_eq!((r.mean_abs_error_px, r.within_tolerance_fraction), (2.0, 0.0));
        assert_eq!(r.histogram, BTreeMap::from([(5, 1), (7, 1)]));
    }

    #[test]
    fn accuracy_join_takes_latest_record_not_after_event() {
        let g = vec![gt(30, 1, 9), gt(10, 1, 3), gt(20, 1, 4)];
        let r = evaluate_accuracy(&[de(25, 1, 4)], &g, 0, 0).unwrap();
        assert_eq!(r.within_tolerance_fraction, 1.0);
        let err = evaluate_accuracy(&[de(5, 1, 4), de(25, 2, 0)], &g, 0, 1).unwrap_err();
        assert_eq!(err, BenchError::MissingGroundTruth { count: 2, t_us: 5, x: 1, y: 0 });
        let r = evaluate_accuracy(&[de(5, 1, 4), de(25, 1, 4)], &g, 0, 1).unwrap();
        assert_eq!((r.matched, r.unmatched), (1, 1));
    }

    #[test]
    fn accuracy_empty_input() {
        let r = evaluate_accuracy(&[], &[gt(0, 0, 1)], 1, 0).unwrap();
        assert_eq!((r.matched, r.within_tolerance_fraction), (0, 0.0));
        assert!(r.to_csv(&FlatConfig::new()).ends_with("matched,mae_px,within_1px\n0,0.000000,0.000000\n"));
    }

    #[test]
    fn equivalence_names_first_difference() {
        let a = [de(1, 1, 1), de(2, 2, 2)];
        assert!(check_equivalence(Variant::Simple, &a, &a).is_ok());
        let v = check_equivalence(Variant::Combined, &a, &[de(1, 1, 1), de(2, 2, 3)]).unwrap_err();
        assert_eq!((v.index, v.actual.unwrap().disparity), (1, 3));
        let v = check_equivalence(Variant::Channels, &a, &a[..1]).unwrap_err();
        assert_eq!((v.index, v.actual), (1, None));
    }

    #[test]
    fn compare_empty_stream() {
        let s = EventStream::new(32, 32, StreamSide::Mixed);
        let cfg = RuntimeConfig { matching: crate::pipeline::MatchConfig { d_max: 15, ..Default::default() }, ..Default::default() };
        let c = compare_variants(&s, &cfg, 1).unwrap();
        assert_eq!(c.report.entries.len(), 4);
        assert!(c.report.entries.iter().all(|e| e.events == 0 && e.kev_per_s == 0.0));
        let csv = c.report.to_csv();
        assert!(csv.starts_with("# machine = "));
        assert!(csv.contains("# d_max = 15\n"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
    }
}
