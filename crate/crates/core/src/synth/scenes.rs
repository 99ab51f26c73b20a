//! Random scene scripts: objects in separate floor cells, an orbiting camera.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{rot_z, Box3, Mat3, SimilarityTransform, Vec3};
use crate::voxel::CameraIntrinsics;
use crate::{seed, Error, Result};

use super::script::{floor_placement, PlanarMotion, SceneScript, ScriptObject, SCRIPT_VERSION};
use super::templates::{template, ObjectTemplate, CLASS_NAMES, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionProfile {
    /// Inter-frame box IoU stays well above 0.5.
    Slow,
    /// Moderate drift and turning.
    Smooth,
    /// Smooth drift plus sudden relocations with large yaw changes.
    Stress,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub frame_count: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub motion: MotionProfile,
    /// Per object and frame, in stress mode.
    pub jump_probability: f64,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub cell_size: f64,
    pub depth_noise: f64,
    /// Total camera sweep around the scene, degrees.
    pub camera_sweep_deg: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            frame_count: 24,
            min_objects: 1,
            max_objects: 5,
            motion: MotionProfile::Smooth,
            jump_probability: 0.4,
            width: 240,
            height: 180,
            focal: 200.0,
            cell_size: 3.5,
            depth_noise: 0.0,
            camera_sweep_deg: 30.0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.frame_count == 0 {
            return bad("frame_count must be at least 1");
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects || self.max_objects > NUM_CLASSES {
            return bad("object count range must satisfy 1 <= min <= max <= 10");
        }
        if !(0.0..=1.0).contains(&self.jump_probability) {
            return bad("jump_probability must lie in [0, 1]");
        }
        if self.width == 0 || self.height == 0 || !(self.focal > 0.0) {
            return bad("image size and focal length must be positive");
        }
        // the largest template footprint diagonal is about 1.7 m
        if !(self.cell_size >= 2.5) {
            return bad("cell_size must be at least 2.5 m");
        }
        if !(self.depth_noise >= 0.0) {
            return bad("depth_noise must be non-negative");
        }
        Ok(())
    }
}

const CELLS_PER_ROW: usize = 3;

/// Allowed range for an object's anchor inside its cell, with room to turn.
struct Cell {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Cell {
    fn new(index: usize, size: f64, template: &ObjectTemplate) -> Self {
        let (col, row) = ((index % CELLS_PER_ROW) as f64, (index / CELLS_PER_ROW) as f64);
        let p = template.physical_scale;
        let r = (p.x * p.x + p.y * p.y).sqrt() / 2.0 + 0.05;
        Self {
            lo: [col * size + r, row * size + r],
            hi: [(col + 1.0) * size - r, (row + 1.0) * size - r],
        }
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.lo[0], self.hi[0]), p[1].clamp(self.lo[1], self.hi[1])]
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        [rng.gen_range(self.lo[0]..=self.hi[0]), rng.gen_range(self.lo[1]..=self.hi[1])]
    }

    /// A point at distance within `[dmin, dmax]` of `from`, or the farthest
    /// corner when no such point exists.
    fn jump(&self, from: [f64; 2], dmin: f64, dmax: f64, rng: &mut ChaCha8Rng) -> [f64; 2] {
        for _ in 0..64 {
            let p = self.sample(rng);
            let d = ((p[0] - from[0]).powi(2) + (p[1] - from[1]).powi(2)).sqrt();
            if d >= dmin && d <= dmax {
                return p;
            }
        }
        let corners = [
            [self.lo[0], self.lo[1]],
            [self.lo[0], self.hi[1]],
            [self.hi[0], self.lo[1]],
            [self.hi[0], self.hi[1]],
        ];
        let dist = |p: &[f64; 2]| (p[0] - from[0]).powi(2) + (p[1] - from[1]).powi(2);
        *corners
            .iter()
            .max_by(|a, b| dist(a).total_cmp(&dist(b)))
            .expect("four corners")
    }
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    (a + PI).rem_euclid(TAU) - PI
}

/// Per-frame absolute (x, y, yaw) of one object.
fn object_track(params: &SceneParams, cell: &Cell, extent: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let (step, turn) = match params.motion {
        MotionProfile::Slow => (0.02, 1.0f64.to_radians()),
        MotionProfile::Smooth | MotionProfile::Stress => (0.06, 4.0f64.to_radians()),
    };
    let mut pos = cell.sample(rng);
    let mut yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let heading = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut vel = [step * heading.cos(), step * heading.sin()];
    let spin = rng.gen_range(-turn..=turn);
    let mut out = Vec::with_capacity(params.frame_count);
    for f in 0..params.frame_count {
        if f > 0 {
            let jump = params.motion == MotionProfile::Stress && rng.gen_bool(params.jump_probability);
            if jump {
                pos = cell.jump(pos, 0.7 * extent, 1.2 * extent, rng);
                let d = rng.gen_range(60f64.to_radians()..=180f64.to_radians());
                yaw = wrap_angle(yaw + if rng.gen_bool(0.5) { d } else { -d });
            } else {
                let next = [pos[0] + vel[0], pos[1] + vel[1]];
                let clamped = cell.clamp(next);
                // bounce off the cell walls
                for a in 0..2 {
                    if clamped[a] != next[a] {
                        vel[a] = -vel[a];
                    }
                }
                pos = clamped;
                yaw = wrap_angle(yaw + spin);
            }
        }
        out.push([pos[0], pos[1], yaw]);
    }
    out
}

/// Camera-to-world transform at `eye` looking at `target`, world z up.
pub fn look_at(eye: Vec3, target: Vec3) -> SimilarityTransform {
    let z = (target - eye).normalize();
    let x = z.cross(&Vec3::z()).normalize();
    let y = z.cross(&x);
    let r = Mat3::from_columns(&[x, y, z]);
    SimilarityTransform::rigid(r, eye).expect("orthonormal look-at basis")
}

/// Deterministic scene for `(seed, index)`.
pub fn generate_scene(params: &SceneParams, base_seed: u64, index: u64) -> Result<SceneScript> {
    params.validate()?;
    let mut rng = seed::rng(base_seed, &[seed::stream::SCENE, index]);
    let n = rng.gen_range(params.min_objects..=params.max_objects);
    let mut classes: Vec<usize> = (0..NUM_CLASSES).collect();
    classes.shuffle(&mut rng);
    classes.truncate(n);

    let cols = n.min(CELLS_PER_ROW);
    let rows = n.div_ceil(CELLS_PER_ROW);
    let size = params.cell_size;
    let (w, d) = (cols as f64 * size, rows as f64 * size);
    let bounds = Box3::from_min_max(Vec3::new(0.0, 0.0, -0.05), Vec3::new(w, d, 3.0))?;

    let mut objects = Vec::with_capacity(n);
    for (k, &c) in classes.iter().enumerate() {
        let t = template(c)?;
        let cell = Cell::new(k, size, &t);
        let extent = t.physical_scale.x.max(t.physical_scale.y);
        let track = object_track(params, &cell, extent, &mut rng);
        let [x0, y0, yaw0] = track[0];
        let initial = floor_placement(&t, x0, y0, yaw0);
        let motion = track
            .iter()
            .map(|&[x, y, yaw]| PlanarMotion {
                dx: x - x0,
                dy: y - y0,
                yaw: wrap_angle(yaw - yaw0),
            })
            .collect();
        objects.push(ScriptObject {
            template: CLASS_NAMES[c].to_string(),
            initial,
            motion,
        });
    }

    let intrinsics = CameraIntrinsics::centered(params.width, params.height, params.focal);
    let half_fov = (params.width as f64 / 2.0 / params.focal).atan();
    let target = Vec3::new(w / 2.0, d / 2.0, 0.4);
    let dist = (w / 2.0 + 0.5) / half_fov.tan() + d / 2.0 + 1.0;
    let sweep = params.camera_sweep_deg.to_radians();
    let start = rng.gen_range(-0.2..0.2) - sweep / 2.0;
    let camera = (0..params.frame_count)
        .map(|f| {
            let s = if params.frame_count > 1 {
                f as f64 / (params.frame_count - 1) as f64
            } else {
                0.0
            };
            let az = start + sweep * s;
            let horiz = rot_z(az) * Vec3::new(0.0, -dist, 0.0);
            let eye = target + horiz + Vec3::new(0.0, 0.0, 0.55 * dist);
            look_at(eye, target)
        })
        .collect();

    let script = SceneScript {
        version: SCRIPT_VERSION,
        name: format!("seq_{index:04}"),
        intrinsics,
        frame_count: params.frame_count,
        bounds,
        floor: true,
        depth_noise: params.depth_noise,
        objects,
        camera,
    };
    script.validate()?;
    Ok(script)
}
