//! Scene descriptions: the flat config loader, the default moving-plate
//! scene, and seeded random scenes.
//!
//! Recognised keys:
//!
//! ```text
//! width, height, focal_px, baseline_m          camera
//! contrast_threshold, seed                     simulator
//! background, duration_us, render_step_us      scene
//! random_objects                               extra seeded random rectangles
//! object.N.{x0,y0,x1,y1,depth,luminance,vx,vy} explicit rectangles (meters, m/s)
//! ```

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::FlatConfig;

use super::{Scene, SceneObject, SimError, SimulatorConfig, StereoCamera, DEFAULT_RENDER_STEP_US};

pub const SCENE_KEYS: &[&str] = &[
    "width",
    "height",
    "focal_px",
    "baseline_m",
    "contrast_threshold",
    "seed",
    "background",
    "duration_us",
    "render_step_us",
    "random_objects",
];

const OBJECT_FIELDS: &[&str] = &["x0", "y0", "x1", "y1", "depth", "luminance", "vx", "vy"];

pub(crate) fn is_scene_key(key: &str) -> bool {
    if SCENE_KEYS.contains(&key) {
        return true;
    }
    let mut parts = key.split('.');
    matches!(
        (parts.next(), parts.next().map(str::parse::<usize>), parts.next(), parts.next()),
        (Some("object"), Some(Ok(_)), Some(field), None) if OBJECT_FIELDS.contains(&field)
    )
}

/// Default benchmark scene: a dark plate sliding right in front of a static
/// bright box, so part of the box is occluded differently in each view.
pub fn default_scene(camera: &StereoCamera) -> Scene {
    let step_s = DEFAULT_RENDER_STEP_US as f64 * 1e-6;
    let far_box = SceneObject::from_pixels(camera, 150.0, 70.0, 70.0, 90.0, 4.0, 200);
    let plate = SceneObject::from_pixels(camera, 30.0, 90.0, 60.0, 60.0, 1.0, 40)
        .with_pixel_velocity(camera, 0.5 / step_s, 0.0);
    Scene {
        background_luminance: 100,
        objects: vec![far_box, plate],
        duration_us: 40_000,
        render_step_us: DEFAULT_RENDER_STEP_US,
    }
}

/// Seeded scene of `n` random rectangles with disparities in 1..=40 px and
/// image speeds up to 1.5 px per render step.
pub fn random_scene(camera: &StereoCamera, seed: u64, n: usize, duration_us: u64, render_step_us: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background_luminance = rng.gen_range(40..=200u8);
    let step_s = render_step_us as f64 * 1e-6;
    let (w, h) = (f64::from(camera.width), f64::from(camera.height));
    let objects = (0..n)
        .map(|_| random_object(&mut rng, camera, background_luminance, w, h, step_s))
        .collect();
    Scene { background_luminance, objects, duration_us, render_step_us }
}

fn random_object(rng: &mut ChaCha8Rng, camera: &StereoCamera, background: u8, w: f64, h: f64, step_s: f64) -> SceneObject {
    let disparity = rng.gen_range(1..=40) as f64;
    let depth = camera.depth_for_disparity(disparity);
    let ow = rng.gen_range(0.1..0.35) * w;
    let oh = rng.gen_range(0.1..0.45) * h;
    let u0 = rng.gen_range(0.0..(w - ow).max(1.0));
    let v0 = rng.gen_range(0.0..(h - oh).max(1.0));
    // Keep clear of the background so every object edge produces events.
    let mut luminance = rng.gen_range(0..=255u8);
    if luminance.abs_diff(background) < 40 {
        luminance = if background > 127 { background - 80 } else { background + 80 };
    }
    let du = rng.gen_range(-1.5..1.5) / step_s;
    let dv = rng.gen_range(-0.5..0.5) / step_s;
    SceneObject::from_pixels(camera, u0, v0, ow, oh, depth, luminance).with_pixel_velocity(camera, du, dv)
}

/// Builds a scene and simulator configuration from a flat config, falling back
/// to the defaults (and the default scene when no objects are given).
pub fn load_scene(cfg: &FlatConfig) -> Result<(Scene, SimulatorConfig), SimError> {
    cfg.check_known(is_scene_key)?;
    let d = SimulatorConfig::default();
    let camera = StereoCamera::new(
        cfg.get_or("width", d.camera.width)?,
        cfg.get_or("height", d.camera.height)?,
        cfg.get_or("focal_px", d.camera.focal_px)?,
        cfg.get_or("baseline_m", d.camera.baseline_m)?,
    )?;
    let sim = SimulatorConfig {
        contrast_threshold: cfg.get_or("contrast_threshold", d.contrast_threshold)?,
        camera,
        seed: cfg.get_or("seed", d.seed)?,
    };
    if sim.contrast_threshold == 0 {
        return Err(SimError::InvalidScene("contrast_threshold must be >= 1".into()));
    }

    let ids: BTreeSet<usize> = cfg
        .keys()
        .filter_map(|k| k.strip_prefix("object.")?.split('.').next()?.parse().ok())
        .collect();
    let random_n: usize = cfg.get_or("random_objects", 0)?;
    let has_explicit = !ids.is_empty();

    let mut scene = if ids.is_empty() && random_n == 0 {
        default_scene(&camera)
    } else {
        Scene {
            background_luminance: 100,
            objects: Vec::new(),
            duration_us: 40_000,
            render_step_us: DEFAULT_RENDER_STEP_US,
        }
    };
    scene.background_luminance = cfg.get_or("background", scene.background_luminance)?;
    scene.duration_us = cfg.get_or("duration_us", scene.duration_us)?;
    scene.render_step_us = cfg.get_or("render_step_us", scene.render_step_us)?;

    for id in ids {
        let field = |name: &str| cfg.get::<f64>(&format!("object.{id}.{name}"));
        let req = |name: &str| {
            field(name)?.ok_or_else(|| SimError::InvalidScene(format!("object.{id}.{name} is required")))
        };
        scene.objects.push(SceneObject {
            x0: req("x0")?,
            y0: req("y0")?,
            x1: req("x1")?,
            y1: req("y1")?,
            depth_m: req("depth")?,
            luminance: cfg.get_or(&format!("object.{id}.luminance"), 255u8)?,
            vx: field("vx")?.unwrap_or(0.0),
            vy: field("vy")?.unwrap_or(0.0),
        });
    }
    if random_n > 0 {
        let extra = random_scene(&camera, sim.seed, random_n, scene.duration_us, scene.render_step_us);
        if !has_explicit && cfg.get_str("background").is_none() {
            scene.background_luminance = extra.background_luminance;
        }
        scene.objects.extend(extra.objects);
    }
    scene.validate()?;
    Ok((scene, sim))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let (scene, sim) = load_scene(&FlatConfig::new()).unwrap();
        assert_eq!(sim, SimulatorConfig::default());
        assert_eq!(scene, default_scene(&StereoCamera::default()));
    }

    #[test]
    fn explicit_objects_and_overrides() {
        let text = "width = 64\nheight = 48\nfocal_px = 100\nduration_us = 500\n\
                    object.0.x0 = -0.1\nobject.0.y0 = -0.1\nobject.0.x1 = 0.1\nobject.0.y1 = 0.1\n\
                    object.0.depth = 2\nobject.0.vx = 0.5\nobject.0.luminance = 30\n";
        let (scene, sim) = load_scene(&FlatConfig::parse(text).unwrap()).unwrap();
        assert_eq!(sim.camera.width, 64);
        assert_eq!(sim.camera.focal_px, 100.0);
        assert_eq!(scene.duration_us, 500);
        assert_eq!(scene.objects.len(), 1);
        assert_eq!(scene.objects[0].luminance, 30);
        assert_eq!(scene.objects[0].vx, 0.5);
        assert_eq!(scene.objects[0].vy, 0.0);
    }

    #[test]
    fn missing_fields_and_unknown_keys_are_errors() {
        let cfg = FlatConfig::parse("object.3.x0 = 1\n").unwrap();
        assert!(matches!(load_scene(&cfg), Err(SimError::InvalidScene(_))));
        let cfg = FlatConfig::parse("objects.3.x0 = 1\n").unwrap();
        assert!(matches!(load_scene(&cfg), Err(SimError::Config(_))));
        let cfg = FlatConfig::parse("object.0.colour = 1\n").unwrap();
        assert!(matches!(load_scene(&cfg), Err(SimError::Config(_))));
    }

    #[test]
    fn random_scenes_depend_only_on_seed() {
        let cam = StereoCamera::default();
        assert_eq!(random_scene(&cam, 7, 4, 1000, 100), random_scene(&cam, 7, 4, 1000, 100));
        assert_ne!(random_scene(&cam, 7, 4, 1000, 100), random_scene(&cam, 8, 4, 1000, 100));
        let cfg = FlatConfig::parse("random_objects = 3\nseed = 11\n").unwrap();
        let (scene, _) = load_scene(&cfg).unwrap();
        assert_eq!(scene.objects, random_scene(&cam, 11, 3, 40_000, 100).objects);
    }
}
