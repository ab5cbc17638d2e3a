//! Stereo event-camera simulator.
//!
//! Two rectified pinhole cameras look at axis-aligned rectangles moving at
//! fixed depths. Both views are rendered on a microsecond virtual clock and
//! consecutive frames are differenced into polarity events; a large
//! luminance step becomes a burst of same-timestamp events.

mod gt_io;
mod render;
mod scene_file;

pub use gt_io::{read_ground_truth, write_ground_truth, GtIoError, GT_MAGIC, GT_RECORD_LEN};
pub use render::{diff_to_events, render_luminance, LuminanceFrame};
pub use scene_file::{default_scene, load_scene, random_scene, SCENE_KEYS};
pub(crate) use scene_file::is_scene_key;

use thiserror::Error;

use crate::aer::{EventStream, Side, StreamSide, MAX_RUNTIME_T_US};
use render::{render_with_owner, NO_OWNER};

pub const DEFAULT_WIDTH: u16 = 320;
pub const DEFAULT_HEIGHT: u16 = 240;
pub const DEFAULT_FOCAL_PX: f64 = 120.0;
pub const DEFAULT_BASELINE_M: f64 = 0.1;
pub const DEFAULT_CONTRAST_THRESHOLD: u16 = 10;
pub const DEFAULT_RENDER_STEP_US: u64 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("dimensions and rates must be positive")]
    NonPositiveDimension,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("frame sizes differ: {prev:?} vs {curr:?}")]
    DimensionMismatch { prev: (u16, u16), curr: (u16, u16) },
    #[error("t = {t_us} us is past the scene duration {duration_us} us")]
    TimeOutOfRange { t_us: u64, duration_us: u64 },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

/// Two identical pinhole cameras separated horizontally by `baseline_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoCamera {
    pub width: u16,
    pub height: u16,
    pub focal_px: f64,
    pub baseline_m: f64,
}

impl StereoCamera {
    pub fn new(width: u16, height: u16, focal_px: f64, baseline_m: f64) -> Result<Self, SimError> {
        let cam = StereoCamera { width, height, focal_px, baseline_m };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.width == 0 || self.height == 0 {
            return Err(SimError::InvalidCamera("zero resolution".into()));
        }
        if self.height >= crate::aer::MAX_WIRE_Y {
            return Err(SimError::InvalidCamera(format!("height {} exceeds packet range", self.height)));
        }
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return Err(SimError::InvalidCamera(format!("focal_px = {}", self.focal_px)));
        }
        if !(self.baseline_m > 0.0 && self.baseline_m.is_finite()) {
            return Err(SimError::InvalidCamera(format!("baseline_m = {}", self.baseline_m)));
        }
        Ok(())
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (f64::from(self.width) / 2.0, f64::from(self.height) / 2.0)
    }

    /// Quantized disparity for a surface at `depth_m`; callers guarantee `depth_m > 0`.
    pub fn disparity_px(&self, depth_m: f64) -> u16 {
        (self.focal_px * self.baseline_m / depth_m).round().clamp(0.0, f64::from(u16::MAX)) as u16
    }

    /// Depth at which a surface has exactly `disparity_px` of disparity.
    pub fn depth_for_disparity(&self, disparity_px: f64) -> f64 {
        self.focal_px * self.baseline_m / disparity_px
    }
}

impl Default for StereoCamera {
    fn default() -> Self {
        StereoCamera {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            focal_px: DEFAULT_FOCAL_PX,
            baseline_m: DEFAULT_BASELINE_M,
        }
    }
}

/// Frontoparallel rectangle in left-camera coordinates (meters, x right, y down),
/// positioned as at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub depth_m: f64,
    pub luminance: u8,
    /// Velocity in m/s.
    pub vx: f64,
    pub vy: f64,
}

impl SceneObject {
    /// Places a static rectangle whose left-image projection starts at pixel
    /// edge `(u0, v0)` and spans `w_px` by `h_px`.
    pub fn from_pixels(camera: &StereoCamera, u0: f64, v0: f64, w_px: f64, h_px: f64, depth_m: f64, luminance: u8) -> Self {
        let (cx, cy) = camera.principal_point();
        let k = depth_m / camera.focal_px;
        SceneObject {
            x0: (u0 - cx) * k,
            y0: (v0 - cy) * k,
            x1: (u0 + w_px - cx) * k,
            y1: (v0 + h_px - cy) * k,
            depth_m,
            luminance,
            vx: 0.0,
            vy: 0.0,
        }
    }

    /// Sets the velocity from an image-space speed in pixels per second.
    pub fn with_pixel_velocity(mut self, camera: &StereoCamera, du_px_s: f64, dv_px_s: f64) -> Self {
        let k = self.depth_m / camera.focal_px;
        self.vx = du_px_s * k;
        self.vy = dv_px_s * k;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub background_luminance: u8,
    pub objects: Vec<SceneObject>,
    pub duration_us: u64,
    pub render_step_us: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.render_step_us == 0 {
            return Err(SimError::InvalidScene("render_step_us must be >= 1".into()));
        }
        if self.duration_us >= MAX_RUNTIME_T_US {
            return Err(SimError::InvalidScene(format!("duration {} us does not fit 32 bits", self.duration_us)));
        }
        if self.objects.len() >= usize::from(NO_OWNER) {
            return Err(SimError::InvalidScene("too many objects".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.depth_m > 0.0 && o.depth_m.is_finite()) {
                return Err(SimError::InvalidScene(format!("object {i}: depth {} must be positive", o.depth_m)));
            }
            let coords = [o.x0, o.y0, o.x1, o.y1, o.vx, o.vy];
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(SimError::InvalidScene(format!("object {i}: non-finite geometry")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorConfig {
    /// Luminance change per emitted event.
    pub contrast_threshold: u16,
    pub camera: StereoCamera,
    pub seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            contrast_threshold: DEFAULT_CONTRAST_THRESHOLD,
            camera: StereoCamera::default(),
            seed: 0,
        }
    }
}

/// True disparity of the surface that produced a left-camera event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRecord {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub disparity_px: u16,
    /// Infinite for background.
    pub depth_m: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub left: EventStream,
    pub right: EventStream,
    pub ground_truth: Vec<GroundTruthRecord>,
}

pub fn ground_truth_disparity(depth_m: f64, camera: &StereoCamera) -> Result<u16, SimError> {
    if !(depth_m > 0.0) {
        return Err(SimError::NonPositiveDepth(depth_m));
    }
    Ok(camera.disparity_px(depth_m))
}

/// Worst-case event rate `w * h * delta_max / delta_t_min` in events per second.
pub fn max_event_rate(width: u32, height: u32, delta_max: f64, delta_t_min_s: f64) -> Result<f64, SimError> {
    if width == 0 || height == 0 || !(delta_t_min_s > 0.0) || !(delta_max >= 0.0) {
        return Err(SimError::NonPositiveDimension);
    }
    Ok(f64::from(width) * f64::from(height) * delta_max / delta_t_min_s)
}

/// Renders both cameras every `render_step_us` and differences consecutive frames.
///
/// The frame at `t = 0` is the reference and emits nothing. Ground truth gets
/// one record per left-event pixel per render step, naming the surface that
/// generated the change: the nearer of the pixel's owners before and after
/// the step, so an edge's events carry the occluding surface's disparity on
/// both its leading and trailing side. Background counts as disparity 0.
pub fn simulate(scene: &Scene, cfg: &SimulatorConfig) -> Result<SimulationOutput, SimError> {
    scene.validate()?;
    cfg.camera.validate()?;
    if cfg.contrast_threshold == 0 {
        return Err(SimError::InvalidScene("contrast_threshold must be >= 1".into()));
    }
    let cam = &cfg.camera;
    let mut left = EventStream::new(cam.width, cam.height, StreamSide::Left);
    let mut right = EventStream::new(cam.width, cam.height, StreamSide::Right);
    let mut ground_truth = Vec::new();

    let (mut prev_l, mut prev_owner_l) = render_with_owner(scene, cam, Side::Left, 0);
    let (mut prev_r, _) = render_with_owner(scene, cam, Side::Right, 0);
    let mut t = scene.render_step_us;
    while t <= scene.duration_us {
        let (curr_l, owner_l) = render_with_owner(scene, cam, Side::Left, t);
        let (curr_r, _) = render_with_owner(scene, cam, Side::Right, t);

        let ev_l = diff_to_events(&prev_l, &curr_l, t, cfg, Side::Left)?;
        let mut last_pixel = None;
        for e in &ev_l {
            if last_pixel == Some((e.x, e.y)) {
                continue;
            }
            last_pixel = Some((e.x, e.y));
            let i = usize::from(e.y) * usize::from(cam.width) + usize::from(e.x);
            let depth_of = |o: u16| if o == NO_OWNER { f64::INFINITY } else { scene.objects[usize::from(o)].depth_m };
            let depth = depth_of(prev_owner_l[i]).min(depth_of(owner_l[i]));
            let disparity_px = if depth.is_finite() { cam.disparity_px(depth) } else { 0 };
            let depth_m = depth as f32;
            ground_truth.push(GroundTruthRecord { t_us: t, x: e.x, y: e.y, disparity_px, depth_m });
        }
        left.events.extend(ev_l);
        right.events.extend(diff_to_events(&prev_r, &curr_r, t, cfg, Side::Right)?);

        prev_l = curr_l;
        prev_owner_l = owner_l;
        prev_r = curr_r;
        t += scene.render_step_us;
    }
    Ok(SimulationOutput { left, right, ground_truth })
}
