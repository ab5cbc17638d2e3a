mod common;

use common::*;
use evstereo::aer::{
    merge_streams, read_stream, read_text, validate_stream, write_stream, write_text, EventStream, MergeError, Side,
    StreamSide, HEADER_LEN, RECORD_LEN,
};
use evstereo::bench::{evaluate_accuracy, event_rate_timeline, ThroughputEntry};
use evstereo::pipeline::{read_disparities, write_disparities, DisparityEvent};
use evstereo::sim::{read_ground_truth, write_ground_truth, GroundTruthRecord};
use proptest::prelude::*;

fn split_sides(s: &EventStream) -> (EventStream, EventStream) {
    let mut l = EventStream::new(s.header.width, s.header.height, StreamSide::Left);
    let mut r = EventStream::new(s.header.width, s.header.height, StreamSide::Right);
    for e in &s.events {
        match e.side {
            Side::Left => l.events.push(*e),
            Side::Right => r.events.push(*e),
        }
    }
    (l, r)
}

proptest! {
    #[test]
    fn binary_stream_roundtrip(seed in any::<u64>(), n in 0usize..300) {
        let s = random_mixed_stream(seed, n, 40, 30, 50);
        let mut buf = Vec::new();
        write_stream(&s, &mut buf).unwrap();
        prop_assert_eq!(buf.len(), HEADER_LEN + n * RECORD_LEN);
        prop_assert_eq!(read_stream(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn text_stream_roundtrip(seed in any::<u64>(), n in 0usize..100) {
        let s = random_mixed_stream(seed, n, 40, 30, 50);
        let mut buf = Vec::new();
        write_text(&s, &mut buf).unwrap();
        prop_assert_eq!(read_text(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn split_then_merge_is_identity(seed in any::<u64>(), n in 0usize..400) {
        let s = random_mixed_stream(seed, n, 20, 10, 3);
        let (l, r) = split_sides(&s);
        let m = merge_streams(&l, &r).unwrap();
        validate_stream(&m).unwrap();
        prop_assert_eq!(m, s);
    }

    #[test]
    fn truncated_files_never_parse(seed in any::<u64>(), n in 1usize..50, cut in 1usize..16) {
        let s = random_mixed_stream(seed, n, 40, 30, 50);
        let mut buf = Vec::new();
        write_stream(&s, &mut buf).unwrap();
        buf.truncate(buf.len() - cut);
        prop_assert!(read_stream(buf.as_slice()).is_err());
    }

    #[test]
    fn timeline_conserves_events(seed in any::<u64>(), n in 0usize..500, bin in 1u64..2000) {
        let s = random_mixed_stream(seed, n, 8, 8, 100);
        let tl = event_rate_timeline(&s, bin).unwrap();
        prop_assert_eq!(tl.total(), n as u64);
        if let Some(last) = s.events.last() {
            prop_assert_eq!(tl.bins.len() as u64, last.t_us / bin + 1);
        }
    }

    #[test]
    fn throughput_arithmetic_is_exact(events in 1u64..10_000_000, micros in 1u64..100_000_000) {
        let secs = micros as f64 * 1e-6;
        let e = ThroughputEntry::new("v", events, secs).unwrap();
        prop_assert!((e.kev_per_s * 1000.0 * secs - events as f64).abs() <= 1e-9 * events as f64);
    }

    #[test]
    fn accuracy_is_permutation_invariant(seed in any::<u64>(), n in 1usize..200, tol in 0u16..3) {
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut gt: Vec<GroundTruthRecord> = (0..n)
            .map(|i| GroundTruthRecord { t_us: (i / 4) as u64 * 10, x: (i % 4) as u16, y: 0, disparity_px: rng.gen_range(0..20), depth_m: 1.0 })
            .collect();
        let mut disp: Vec<DisparityEvent> = gt
            .iter()
            .map(|g| DisparityEvent { t_us: g.t_us + rng.gen_range(0..15), x: g.x, y: 0, disparity: rng.gen_range(0..20), sad_score: 0 })
            .collect();
        let a = evaluate_accuracy(&disp, &gt, tol, 0).unwrap();
        gt.shuffle(&mut rng);
        disp.shuffle(&mut rng);
        let b = evaluate_accuracy(&disp, &gt, tol, 0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!((0.0..=1.0).contains(&a.within_tolerance_fraction));
        prop_assert_eq!(a.histogram.values().sum::<usize>(), a.matched);
    }

    #[test]
    fn disparity_and_gt_files_roundtrip(seed in any::<u64>(), n in 0usize..100) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<DisparityEvent> = (0..n)
            .map(|_| DisparityEvent { t_us: rng.gen(), x: rng.gen(), y: rng.gen(), disparity: rng.gen(), sad_score: rng.gen() })
            .collect();
        let mut buf = Vec::new();
        write_disparities(&d, &mut buf).unwrap();
        prop_assert_eq!(read_disparities(buf.as_slice()).unwrap(), d);
        let g: Vec<GroundTruthRecord> = (0..n)
            .map(|_| GroundTruthRecord { t_us: rng.gen(), x: rng.gen(), y: rng.gen(), disparity_px: rng.gen(), depth_m: rng.gen_range(0.1..100.0) })
            .collect();
        let mut buf = Vec::new();
        write_ground_truth(&g, &mut buf).unwrap();
        prop_assert_eq!(read_ground_truth(buf.as_slice()).unwrap(), g);
    }
}

#[test]
fn merge_rejects_mismatched_headers_and_disorder() {
    let l = EventStream::new(10, 10, StreamSide::Left);
    let r = EventStream::new(11, 10, StreamSide::Right);
    assert!(matches!(merge_streams(&l, &r), Err(MergeError::HeaderMismatch { .. })));
    let mut l = random_mixed_stream(3, 20, 10, 10, 5);
    l.events.reverse();
    let r = EventStream::new(10, 10, StreamSide::Right);
    assert!(matches!(merge_streams(&l, &r), Err(MergeError::UnorderedInput { side: Side::Left, .. })));
}
