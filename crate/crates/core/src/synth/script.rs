//! Scene scripts: templates, planar object motion, camera path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{rot_z, Box3, SimilarityTransform, Vec3};
use crate::voxel::CameraIntrinsics;
use crate::{Error, Result};

use super::templates::{template_by_name, ObjectTemplate};

pub const SCRIPT_VERSION: u32 = 1;

/// Offset from the frame-0 placement: translation along the floor plus a
/// yaw about the object's vertical axis through its bottom center.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarMotion {
    pub dx: f64,
    pub dy: f64,
    /// Radians, counter-clockwise seen from above.
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptObject {
    /// Template name, one of the class names.
    pub template: String,
    /// Canonical-to-world transform at frame 0.
    pub initial: SimilarityTransform,
    /// One entry per frame.
    pub motion: Vec<PlanarMotion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub version: u32,
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub frame_count: usize,
    /// Objects must stay inside these bounds; the floor (z = 0) is rendered
    /// over their xy extent when `floor` is set.
    pub bounds: Box3,
    #[serde(default = "default_true")]
    pub floor: bool,
    /// Standard deviation of additive Gaussian depth noise, meters.
    #[serde(default)]
    pub depth_noise: f64,
    pub objects: Vec<ScriptObject>,
    /// Camera-to-world transform per frame.
    pub camera: Vec<SimilarityTransform>,
}

fn default_true() -> bool {
    true
}

/// Canonical-to-world transform placing `template`'s bottom center at
/// `(x, y, 0)` with the given yaw.
pub fn floor_placement(template: &ObjectTemplate, x: f64, y: f64, yaw: f64) -> SimilarityTransform {
    let s = template.scale();
    let r = rot_z(yaw);
    let anchor = template.bottom_center();
    let t = Vec3::new(x, y, 0.0) - s * (r * anchor);
    SimilarityTransform::new(s, r, t).expect("yaw rotation is valid")
}

/// World-space axis-aligned box of the posed tight canonical bounds.
pub fn posed_box(template: &ObjectTemplate, pose: &SimilarityTransform) -> Box3 {
    let (lo, hi) = template.canonical_bounds();
    let mut min = Vec3::repeat(f64::INFINITY);
    let mut max = Vec3::repeat(f64::NEG_INFINITY);
    for c in 0..8 {
        let q = Vec3::new(
            if c & 1 == 0 { lo.x } else { hi.x },
            if c & 2 == 0 { lo.y } else { hi.y },
            if c & 4 == 0 { lo.z } else { hi.z },
        );
        let p = pose.apply(&q);
        min = min.inf(&p);
        max = max.sup(&p);
    }
    Box3::from_min_max(min, max).expect("template bounds have positive extent")
}

impl ScriptObject {
    /// Pose at `frame`: the planar motion applied about the frame-0 anchor
    /// (the posed bottom center).
    pub fn pose_at(&self, template: &ObjectTemplate, frame: usize) -> SimilarityTransform {
        let m = self.motion[frame];
        let anchor = self.initial.apply(&template.bottom_center());
        let r = rot_z(m.yaw);
        let shift = anchor + Vec3::new(m.dx, m.dy, 0.0) - r * anchor;
        let motion = SimilarityTransform::rigid(r, shift).expect("yaw rotation is valid");
        motion.compose(&self.initial)
    }
}

impl SceneScript {
    /// Checks structure and loads the referenced templates, in object order.
    pub fn validate(&self) -> Result<Vec<ObjectTemplate>> {
        if self.version != SCRIPT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "scene script version {} (expected {SCRIPT_VERSION})",
                self.version
            )));
        }
        self.intrinsics.validate()?;
        if self.frame_count == 0 {
            return Err(Error::InvalidConfig("frame_count must be at least 1".into()));
        }
        if self.camera.len() != self.frame_count {
            return Err(Error::InvalidConfig(format!(
                "{} camera poses for {} frames",
                self.camera.len(),
                self.frame_count
            )));
        }
        if let Some(c) = self.camera.iter().find(|c| (c.scale() - 1.0).abs() > 1e-12) {
            return Err(Error::NonUnitCameraScale(c.scale()));
        }
        if !(self.depth_noise >= 0.0 && self.depth_noise.is_finite()) {
            return Err(Error::InvalidConfig("depth_noise must be non-negative".into()));
        }
        let mut templates = Vec::with_capacity(self.objects.len());
        for (k, o) in self.objects.iter().enumerate() {
            let t = template_by_name(&o.template)?;
            if o.motion.len() != self.frame_count {
                return Err(Error::InvalidConfig(format!(
                    "object {k}: {} motion entries for {} frames",
                    o.motion.len(),
                    self.frame_count
                )));
            }
            let (lo, hi) = (self.bounds.min(), self.bounds.max());
            for f in 0..self.frame_count {
                let b = posed_box(&t, &o.pose_at(&t, f));
                let (blo, bhi) = (b.min(), b.max());
                if (0..3).any(|a| blo[a] < lo[a] - 1e-9 || bhi[a] > hi[a] + 1e-9) {
                    return Err(Error::InvalidConfig(format!(
                        "object {k} leaves the scene bounds at frame {f}"
                    )));
                }
            }
            templates.push(t);
        }
        Ok(templates)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}
