//! Brute-force oracles and input generators shared by the integration tests.
//! Nothing here calls the library's algorithms; only its data types.

#![allow(dead_code)]

use std::collections::BTreeMap;

use evstereo::aer::{EventStream, PolarityEvent, Side, StreamSide};
use evstereo::pipeline::{AggregatedEvent, DisparityEvent, MatchConfig};
use evstereo::sim::{Scene, SimulatorConfig, StereoCamera};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Canonically ordered mixed stream of `n` random events.
pub fn random_mixed_stream(seed: u64, n: usize, width: u16, height: u16, max_dt: u64) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = EventStream::new(width, height, StreamSide::Mixed);
    let mut t = 0u64;
    for _ in 0..n {
        t += rng.gen_range(0..=max_dt);
        let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
        let pol = if rng.gen_bool(0.5) { 1 } else { -1 };
        s.events.push(PolarityEvent::new(t, rng.gen_range(0..width), rng.gen_range(0..height), pol, side));
    }
    s.sort_canonical();
    s
}

/// Like `random_mixed_stream` but concentrated on a few pixels so windows
/// actually accumulate.
pub fn clustered_stream(seed: u64, n: usize, width: u16, height: u16, max_dt: u64, hot: usize) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels: Vec<(u16, u16, Side)> = (0..hot)
        .map(|_| {
            let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
            (rng.gen_range(0..width), rng.gen_range(0..height), side)
        })
        .collect();
    let mut s = EventStream::new(width, height, StreamSide::Mixed);
    let mut t = 0u64;
    for _ in 0..n {
        t += rng.gen_range(0..=max_dt);
        let (x, y, side) = pixels[rng.gen_range(0..pixels.len())];
        let pol = if rng.gen_bool(0.7) { 1 } else { -1 };
        s.events.push(PolarityEvent::new(t, x, y, pol, side));
    }
    s.sort_canonical();
    s
}

/// Whole-stream window aggregation: per pixel, split its time-sorted events
/// wherever the gap to the previous one exceeds `deadline_us`.
pub fn oracle_aggregate(events: &[PolarityEvent], deadline_us: u64) -> Vec<AggregatedEvent> {
    let mut per_pixel: BTreeMap<(Side, u16, u16), Vec<(u64, i8)>> = BTreeMap::new();
    for e in events {
        per_pixel.entry((e.side, e.x, e.y)).or_default().push((e.t_us, e.polarity));
    }
    let mut out = Vec::new();
    for ((side, x, y), mut evs) in per_pixel {
        evs.sort_by_key(|&(t, _)| t);
        let mut sum = 0i32;
        let mut last: Option<u64> = None;
        for (t, p) in evs {
            if let Some(l) = last {
                if t - l > deadline_us {
                    out.push(AggregatedEvent { t_us: l, x, y, polarity_sum: sum, side });
                    sum = 0;
                }
            }
            sum += i32::from(p);
            last = Some(t);
        }
        if let Some(l) = last {
            out.push(AggregatedEvent { t_us: l, x, y, polarity_sum: sum, side });
        }
    }
    out
}

pub fn sorted_multiset(mut v: Vec<AggregatedEvent>) -> Vec<AggregatedEvent> {
    v.sort_by_key(|a| (a.t_us, a.side, a.y, a.x, a.polarity_sum));
    v
}

/// Plain 2-D grid, `g[y][x]`.
pub type Grid = Vec<Vec<i32>>;

pub fn zero_grid(width: usize, height: usize) -> Grid {
    vec![vec![0; width]; height]
}

/// Exhaustive SAD with explicit border clamping.
pub fn oracle_sad(left: &Grid, right: &Grid, x: usize, y: usize, d: usize, b: usize) -> u64 {
    let h = left.len() as i64;
    let w = left[0].len() as i64;
    let clamp = |v: i64, n: i64| -> usize {
        if v < 0 {
            0
        } else if v >= n {
            (n - 1) as usize
        } else {
            v as usize
        }
    };
    let mut total = 0u64;
    let bi = b as i64;
    for dy in -bi..=bi {
        for dx in -bi..=bi {
            let yy = clamp(y as i64 + dy, h);
            let lx = clamp(x as i64 + dx, w);
            let rx = clamp(x as i64 - d as i64 + dx, w);
            total += (i64::from(left[yy][lx]) - i64::from(right[yy][rx])).unsigned_abs();
        }
    }
    total
}

/// Argmin over every candidate `0..=min(d_max, x)`, smallest `d` on ties.
pub fn oracle_argmin(left: &Grid, right: &Grid, x: usize, y: usize, b: usize, d_max: usize) -> (u16, u32) {
    let scores: Vec<u64> = (0..=d_max.min(x)).map(|d| oracle_sad(left, right, x, y, d, b)).collect();
    let best = *scores.iter().min().unwrap();
    let d = scores.iter().position(|&s| s == best).unwrap();
    (d as u16, best.min(u64::from(u32::MAX)) as u32)
}

/// The full pipeline rebuilt from oracles: window aggregates in flush order,
/// running per-pixel prefix sums for levels, exhaustive argmin for left ones.
pub fn oracle_pipeline(s: &EventStream, cfg: &MatchConfig) -> Vec<DisparityEvent> {
    let (w, h) = (usize::from(s.header.width), usize::from(s.header.height));
    let mut aggs = oracle_aggregate(&s.events, cfg.deadline_us);
    aggs.sort_by_key(|a| a.flush_key());
    let mut grids = [zero_grid(w, h), zero_grid(w, h)];
    let mut out = Vec::new();
    for a in aggs {
        let g = &mut grids[a.side.index()];
        let cell = &mut g[usize::from(a.y)][usize::from(a.x)];
        *cell = cell.wrapping_add(a.polarity_sum);
        if a.side == Side::Left {
            let (d, score) = oracle_argmin(
                &grids[0],
                &grids[1],
                usize::from(a.x),
                usize::from(a.y),
                usize::from(cfg.window_radius),
                usize::from(cfg.d_max),
            );
            out.push(DisparityEvent { t_us: a.t_us, x: a.x, y: a.y, disparity: d, sad_score: score });
        }
    }
    out
}

/// Independent renderer: a pixel shows the nearest object whose projected
/// rectangle contains its centre; equal depths go to the later object.
pub fn oracle_render(scene: &Scene, cam: &StereoCamera, side: Side, t_us: u64) -> Vec<u8> {
    let (w, h) = (usize::from(cam.width), usize::from(cam.height));
    let (cx, cy) = (f64::from(cam.width) / 2.0, f64::from(cam.height) / 2.0);
    let t = t_us as f64 * 1e-6;
    let mut frame = vec![scene.background_luminance; w * h];
    for py in 0..h {
        for px in 0..w {
            let (u, v) = (px as f64 + 0.5, py as f64 + 0.5);
            let mut best: Option<(f64, u8)> = None;
            for o in &scene.objects {
                let k = cam.focal_px / o.depth_m;
                let shift = match side {
                    Side::Left => 0.0,
                    Side::Right => (cam.focal_px * cam.baseline_m / o.depth_m).round(),
                };
                let (u0, u1) = (cx + (o.x0 + o.vx * t) * k - shift, cx + (o.x1 + o.vx * t) * k - shift);
                let (v0, v1) = (cy + (o.y0 + o.vy * t) * k, cy + (o.y1 + o.vy * t) * k);
                if u0 <= u && u < u1 && v0 <= v && v < v1 && best.is_none_or(|(d, _)| o.depth_m <= d) {
                    best = Some((o.depth_m, o.luminance));
                }
            }
            if let Some((_, lum)) = best {
                frame[py * w + px] = lum;
            }
        }
    }
    frame
}

/// Per (t, side, x, y): signed event count from direct frame differencing.
pub fn oracle_event_counts(scene: &Scene, cfg: &SimulatorConfig) -> BTreeMap<(u64, Side, u16, u16), i32> {
    let cam = &cfg.camera;
    let c = i32::from(cfg.contrast_threshold);
    let mut counts = BTreeMap::new();
    for side in [Side::Left, Side::Right] {
        let mut prev = oracle_render(scene, cam, side, 0);
        let mut t = scene.render_step_us;
        while t <= scene.duration_us {
            let curr = oracle_render(scene, cam, side, t);
            for (i, (&a, &b)) in prev.iter().zip(&curr).enumerate() {
                let delta = i32::from(b) - i32::from(a);
                let n = delta.abs() / c;
                if n > 0 {
                    let (x, y) = ((i % usize::from(cam.width)) as u16, (i / usize::from(cam.width)) as u16);
                    counts.insert((t, side, x, y), n * delta.signum());
                }
            }
            prev = curr;
            t += scene.render_step_us;
        }
    }
    counts
}

pub fn event_counts(streams: &[&EventStream]) -> BTreeMap<(u64, Side, u16, u16), i32> {
    let mut counts = BTreeMap::new();
    for s in streams {
        for e in &s.events {
            *counts.entry((e.t_us, e.side, e.x, e.y)).or_insert(0) += i32::from(e.polarity);
        }
    }
    counts
}
