//! Rectangle rasterizer and frame differencing.

use crate::aer::{PolarityEvent, Side};

use super::{Scene, SimError, SimulatorConfig, StereoCamera};

/// Marks background in an owner map.
pub(crate) const NO_OWNER: u16 = u16::MAX;

/// Grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LuminanceFrame {
    pub width: u16,
    pub height: u16,
    pub data: Vec<u8>,
}

impl LuminanceFrame {
    pub fn filled(width: u16, height: u16, value: u8) -> Self {
        LuminanceFrame {
            width,
            height,
            data: vec![value; usize::from(width) * usize::from(height)],
        }
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> u8 {
        self.data[usize::from(y) * usize::from(self.width) + usize::from(x)]
    }

    pub fn set(&mut self, x: u16, y: u16, v: u8) {
        let w = usize::from(self.width);
        self.data[usize::from(y) * w + usize::from(x)] = v;
    }
}

/// Half-open pixel interval covered by the edges `[a, b)` under the pixel-centre rule.
fn pixel_span(a: f64, b: f64) -> (i64, i64) {
    ((a - 0.5).ceil() as i64, (b - 0.5).ceil() as i64)
}

/// Pixel rectangle `(col0, col1, row0, row1)` of object `idx` in `side`'s image at `t_us`,
/// unclipped. The right image is the left one shifted by the quantized disparity.
pub(crate) fn object_pixel_rect(scene: &Scene, camera: &StereoCamera, idx: usize, side: Side, t_us: u64) -> (i64, i64, i64, i64) {
    let o = &scene.objects[idx];
    let t_s = t_us as f64 * 1e-6;
    let (dx, dy) = (o.vx * t_s, o.vy * t_s);
    let (cx, cy) = camera.principal_point();
    let scale = camera.focal_px / o.depth_m;
    let (c0, c1) = pixel_span(cx + (o.x0 + dx) * scale, cx + (o.x1 + dx) * scale);
    let (r0, r1) = pixel_span(cy + (o.y0 + dy) * scale, cy + (o.y1 + dy) * scale);
    let shift = match side {
        Side::Left => 0,
        Side::Right => i64::from(camera.disparity_px(o.depth_m)),
    };
    (c0 - shift, c1 - shift, r0, r1)
}

/// Back-to-front drawing order: farthest first, ties in declaration order.
pub(crate) fn painter_order(scene: &Scene) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scene.objects.len()).collect();
    order.sort_by(|&a, &b| scene.objects[b].depth_m.total_cmp(&scene.objects[a].depth_m));
    order
}

/// Renders one side and returns, per pixel, the index of the visible object.
pub(crate) fn render_with_owner(scene: &Scene, camera: &StereoCamera, side: Side, t_us: u64) -> (LuminanceFrame, Vec<u16>) {
    let (w, h) = (camera.width, camera.height);
    let mut frame = LuminanceFrame::filled(w, h, scene.background_luminance);
    let mut owner = vec![NO_OWNER; frame.data.len()];
    for idx in painter_order(scene) {
        let (c0, c1, r0, r1) = object_pixel_rect(scene, camera, idx, side, t_us);
        let (c0, c1) = (c0.max(0), c1.min(i64::from(w)));
        let (r0, r1) = (r0.max(0), r1.min(i64::from(h)));
        if c0 >= c1 || r0 >= r1 {
            continue;
        }
        let lum = scene.objects[idx].luminance;
        for row in r0..r1 {
            let base = row as usize * usize::from(w);
            frame.data[base + c0 as usize..base + c1 as usize].fill(lum);
            owner[base + c0 as usize..base + c1 as usize].fill(idx as u16);
        }
    }
    (frame, owner)
}

/// Renders the luminance seen by one camera at `t_us`.
///
/// Objects are drawn back to front, so a nearer rectangle hides whatever lies
/// behind it along that camera's line of sight.
pub fn render_luminance(scene: &Scene, camera: &StereoCamera, side: Side, t_us: u64) -> Result<LuminanceFrame, SimError> {
    if t_us > scene.duration_us {
        return Err(SimError::TimeOutOfRange { t_us, duration_us: scene.duration_us });
    }
    Ok(render_with_owner(scene, camera, side, t_us).0)
}

/// Emits `floor(|delta| / threshold)` events of polarity `sign(delta)` per pixel,
/// all stamped `t_us`, in row-major order.
pub fn diff_to_events(
    prev: &LuminanceFrame,
    curr: &LuminanceFrame,
    t_us: u64,
    cfg: &SimulatorConfig,
    side: Side,
) -> Result<Vec<PolarityEvent>, SimError> {
    if (prev.width, prev.height) != (curr.width, curr.height) {
        return Err(SimError::DimensionMismatch {
            prev: (prev.width, prev.height),
            curr: (curr.width, curr.height),
        });
    }
    let threshold = i32::from(cfg.contrast_threshold.max(1));
    let width = usize::from(curr.width);
    let mut events = Vec::new();
    for (i, (&a, &b)) in prev.data.iter().zip(&curr.data).enumerate() {
        if a == b {
            continue;
        }
        let delta = i32::from(b) - i32::from(a);
        let n = delta.abs() / threshold;
        if n == 0 {
            continue;
        }
        let (x, y) = ((i % width) as u16, (i / width) as u16);
        let polarity = delta.signum() as i8;
        events.extend((0..n).map(|_| PolarityEvent { t_us, x, y, polarity, side }));
    }
    Ok(events)
}
