//! Event-triggered SAD matching along the epipolar row.

use crate::aer::Side;

use super::{LevelEvent, LevelFrame, MatchConfig, PipelineError, StereoLevels};

/// Winning disparity for one left-camera level event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DisparityEvent {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub disparity: u16,
    pub sad_score: u32,
}

#[inline]
fn clamp_index(v: isize, len: isize) -> usize {
    v.clamp(0, len - 1) as usize
}

/// Sum of absolute differences between the `(2b+1)^2` window centred on
/// `(x, y)` in `left` and the window centred on `(x - d, y)` in `right`.
///
/// Window samples falling outside the frame take the value of the nearest
/// border pixel. Scores saturate at `u32::MAX`.
pub fn sad(left: &LevelFrame, right: &LevelFrame, x: usize, y: usize, d: usize, b: usize) -> u32 {
    debug_assert_eq!((left.width, left.height), (right.width, right.height));
    let (w, h) = (left.width as isize, left.height as isize);
    let (xi, yi, di, bi) = (x as isize, y as isize, d as isize, b as isize);
    let (lx0, lx1, rx0) = (xi - bi, xi + bi, xi - di - bi);
    let interior = lx0 >= 0 && rx0 >= 0 && lx1 < w;

    let mut acc: u64 = 0;
    for ky in -bi..=bi {
        let row = clamp_index(yi + ky, h);
        let (lrow, rrow) = (left.row(row), right.row(row));
        if interior {
            let (l, r) = (&lrow[lx0 as usize..=lx1 as usize], &rrow[rx0 as usize..]);
            acc += l
                .iter()
                .zip(r)
                .map(|(&a, &b)| (i64::from(a) - i64::from(b)).unsigned_abs())
                .sum::<u64>();
        } else {
            for kx in -bi..=bi {
                let a = lrow[clamp_index(xi + kx, w)];
                let b = rrow[clamp_index(xi - di + kx, w)];
                acc += (i64::from(a) - i64::from(b)).unsigned_abs();
            }
        }
    }
    acc.min(u64::from(u32::MAX)) as u32
}

/// Runs the matcher for a level event whose update is already in `frames`.
///
/// Right-side events only update state and yield `None`. For a left event the
/// candidates are `d = 0..=min(d_max, x)`; the smallest `d` wins ties.
pub fn disparity_on_level_event(
    frames: &StereoLevels,
    le: &LevelEvent,
    cfg: &MatchConfig,
) -> Result<Option<DisparityEvent>, PipelineError> {
    if le.side == Side::Right {
        return Ok(None);
    }
    let (left, right) = (frames.left(), frames.right());
    if le.x >= left.width || le.y >= left.height {
        return Err(PipelineError::CoordinateOutOfBounds { x: le.x, y: le.y });
    }
    let (x, y, b) = (usize::from(le.x), usize::from(le.y), usize::from(cfg.window_radius));
    let max_d = usize::from(cfg.d_max).min(x);
    let mut best = (0usize, u32::MAX);
    for d in 0..=max_d {
        let score = sad(left, right, x, y, d, b);
        if score < best.1 {
            best = (d, score);
            if score == 0 {
                break;
            }
        }
    }
    Ok(Some(DisparityEvent {
        t_us: le.t_us,
        x: le.x,
        y: le.y,
        disparity: best.0 as u16,
        sad_score: best.1,
    }))
}
