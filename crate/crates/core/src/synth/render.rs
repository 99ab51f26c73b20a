//! Z-buffer depth rendering of posed voxel templates and per-frame ground truth.

use rand_distr::{Distribution, Normal};

use crate::geom::{Box3, SimilarityTransform, Vec3};
use crate::pose::SymmetryClass;
use crate::voxel::{CameraIntrinsics, DepthImage, Dims, NocGrid, OccupancyGrid};
use crate::{seed, Result, OBJECT_RES};

use super::script::{posed_box, SceneScript};
use super::templates::ObjectTemplate;

/// Ground truth for one scripted object in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    /// Index into the script's object list; stable across frames.
    pub object: usize,
    pub class_id: usize,
    pub symmetry: SymmetryClass,
    pub bbox: Box3,
    pub pose: SimilarityTransform,
    /// Canonical voxels observed in this frame.
    pub visible: OccupancyGrid,
}

impl GroundTruthObject {
    pub fn visible_count(&self) -> usize {
        self.visible.count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub frame: usize,
    pub camera_pose: SimilarityTransform,
    pub objects: Vec<GroundTruthObject>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub depth: DepthImage,
    /// Script object index hit by each pixel, row-major; `None` for floor
    /// and background.
    pub instance: Vec<Option<u16>>,
    pub gt: GroundTruthFrame,
}

/// Ray `o + t·d` expressed in a template's lattice coordinates, where the
/// canonical cube spans `[0, res]³`.
struct LatticeRay {
    a: Vec3,
    b: Vec3,
}

impl LatticeRay {
    fn new(inv_pose: &SimilarityTransform, o: &Vec3, d: &Vec3) -> Self {
        let n = OBJECT_RES as f64;
        Self {
            a: inv_pose.apply(o) * n,
            b: inv_pose.apply_vector(d) * n,
        }
    }

    /// Parameter interval inside the lattice cube.
    fn clip(&self, n: f64) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for i in 0..3 {
            if self.b[i].abs() < 1e-15 {
                if self.a[i] < 0.0 || self.a[i] > n {
                    return None;
                }
                continue;
            }
            let (lo, hi) = ((0.0 - self.a[i]) / self.b[i], (n - self.a[i]) / self.b[i]);
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// Entry parameter of the first occupied voxel hit before `limit`.
    fn first_hit(&self, occ: &OccupancyGrid, limit: f64) -> Option<f64> {
        let dims = occ.dims();
        let n = dims.0[0];
        let (t0, t1) = self.clip(n as f64)?;
        if t0 >= limit {
            return None;
        }
        let mid = self.a + self.b * t0;
        let mut v = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            v[i] = (mid[i].floor() as i64).clamp(0, n as i64 - 1);
            if self.b[i] > 0.0 {
                step[i] = 1;
                t_max[i] = ((v[i] + 1) as f64 - self.a[i]) / self.b[i];
                t_delta[i] = 1.0 / self.b[i];
            } else if self.b[i] < 0.0 {
                step[i] = -1;
                t_max[i] = (v[i] as f64 - self.a[i]) / self.b[i];
                t_delta[i] = -1.0 / self.b[i];
            }
        }
        let mut t = t0;
        loop {
            if occ.get(v[0] as usize, v[1] as usize, v[2] as usize) {
                return Some(t);
            }
            let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            t = t_max[axis];
            if t > t1 || t >= limit {
                return None;
            }
            v[axis] += step[axis];
            if v[axis] < 0 || v[axis] >= n as i64 {
                return None;
            }
            t_max[axis] += t_delta[axis];
        }
    }
}

/// Renders depth (camera z) and the instance map of posed occupancy grids,
/// plus an optional floor plane `z = 0` limited to `floor`'s xy extent.
pub fn render_depth(
    intrinsics: &CameraIntrinsics,
    camera_pose: &SimilarityTransform,
    objects: &[(&OccupancyGrid, &SimilarityTransform)],
    floor: Option<&Box3>,
) -> Result<(DepthImage, Vec<Option<u16>>)> {
    intrinsics.validate()?;
    let (w, h) = (intrinsics.width, intrinsics.height);
    let inv: Vec<SimilarityTransform> = objects.iter().map(|(_, p)| p.inverse()).collect();
    let o = *camera_pose.translation();
    let mut depth = DepthImage::invalid(w, h);
    let mut instance = vec![None; w * h];
    for v in 0..h {
        for u in 0..w {
            // unit camera-z component, so the ray parameter is the depth
            let d = camera_pose.apply_vector(&intrinsics.ray(u, v));
            let mut best = f64::INFINITY;
            let mut hit = None;
            if let Some(fb) = floor {
                if d.z < 0.0 {
                    let t = -o.z / d.z;
                    let p = o + d * t;
                    let (lo, hi) = (fb.min(), fb.max());
                    if t > 0.0 && p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y {
                        best = t;
                    }
                }
            }
            for (k, ((occ, _), inv)) in objects.iter().zip(&inv).enumerate() {
                let ray = LatticeRay::new(inv, &o, &d);
                if let Some(t) = ray.first_hit(occ, best) {
                    if t > 0.0 && t < best {
                        best = t;
                        hit = Some(k as u16);
                    }
                }
            }
            if best.is_finite() {
                depth.set(u, v, best);
                instance[v * w + u] = hit;
            }
        }
    }
    Ok((depth, instance))
}

/// Canonical voxels of `occ` whose posed centers project onto a valid pixel
/// with `|depth − voxel depth| < tau`.
pub fn visible_mask(
    occ: &OccupancyGrid,
    pose: &SimilarityTransform,
    depth: &DepthImage,
    intrinsics: &CameraIntrinsics,
    camera_pose: &SimilarityTransform,
    tau: f64,
) -> OccupancyGrid {
    let world_to_cam = camera_pose.inverse();
    let to_cam = world_to_cam.compose(pose);
    let dims = occ.dims();
    let mut out = OccupancyGrid::empty(dims);
    for i in occ.occupied() {
        let q = canonical_center(dims, i);
        let pc = to_cam.apply(&q);
        if let Some((u, v)) = intrinsics.project(&pc) {
            if let Some(d) = depth.get(u, v) {
                if (d - pc.z).abs() < tau {
                    out.set_index(i, true);
                }
            }
        }
    }
    out
}

/// Canonical coordinate of voxel `i`'s center.
pub fn canonical_center(dims: Dims, i: usize) -> Vec3 {
    let [x, y, z] = dims.coords(i);
    Vec3::new(
        (x as f64 + 0.5) / dims.0[0] as f64,
        (y as f64 + 0.5) / dims.0[1] as f64,
        (z as f64 + 0.5) / dims.0[2] as f64,
    )
}

/// Ground-truth canonical coordinates of a posed template.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedNoc {
    pub noc: NocGrid,
    pub pose: SimilarityTransform,
}

impl PosedNoc {
    /// `(canonical, frame)` point pairs over the valid voxels.
    pub fn correspondences(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        self.noc
            .coords()
            .iter()
            .zip(self.noc.valid_mask())
            .filter(|(_, v)| **v)
            .map(|(c, _)| (*c, self.pose.apply(c)))
    }
}

/// Every occupied canonical voxel carries its own center as coordinate.
pub fn ground_truth_noc(template: &ObjectTemplate, pose: &SimilarityTransform) -> PosedNoc {
    let occ = template.occupancy();
    let mut noc = NocGrid::empty(occ.dims());
    for i in occ.occupied() {
        noc.set(i, canonical_center(occ.dims(), i))
            .expect("voxel centers lie in the unit cube");
    }
    PosedNoc { noc, pose: *pose }
}

/// A validated script with its templates loaded.
#[derive(Debug, Clone)]
pub struct Scene {
    script: SceneScript,
    templates: Vec<ObjectTemplate>,
}

impl Scene {
    pub fn new(script: SceneScript) -> Result<Self> {
        let templates = script.validate()?;
        Ok(Self { script, templates })
    }

    pub fn script(&self) -> &SceneScript {
        &self.script
    }

    /// Template of each script object, in object order.
    pub fn templates(&self) -> &[ObjectTemplate] {
        &self.templates
    }

    pub fn pose(&self, object: usize, frame: usize) -> SimilarityTransform {
        self.script.objects[object].pose_at(&self.templates[object], frame)
    }

    /// Renders one frame; `tau` sets the visibility band and `noise_seed`
    /// drives the depth noise.
    pub fn render_frame(&self, frame: usize, tau: f64, noise_seed: u64) -> Result<RenderedFrame> {
        let s = &self.script;
        let camera_pose = s.camera[frame];
        let poses: Vec<SimilarityTransform> = (0..s.objects.len()).map(|k| self.pose(k, frame)).collect();
        let posed: Vec<(&OccupancyGrid, &SimilarityTransform)> = self
            .templates
            .iter()
            .zip(&poses)
            .map(|(t, p)| (t.occupancy(), p))
            .collect();
        let floor = s.floor.then_some(&s.bounds);
        let (mut depth, instance) = render_depth(&s.intrinsics, &camera_pose, &posed, floor)?;
        if s.depth_noise > 0.0 {
            let mut rng = seed::rng(noise_seed, &[seed::stream::DEPTH_NOISE, frame as u64]);
            let normal = Normal::new(0.0, s.depth_noise).expect("finite sigma");
            for v in 0..depth.height() {
                for u in 0..depth.width() {
                    if let Some(d) = depth.get(u, v) {
                        depth.set(u, v, (d + normal.sample(&mut rng)).max(1e-6));
                    }
                }
            }
        }
        let objects = self
            .templates
            .iter()
            .zip(&poses)
            .enumerate()
            .map(|(k, (t, pose))| GroundTruthObject {
                object: k,
                class_id: t.class_id,
                symmetry: t.symmetry,
                bbox: posed_box(t, pose),
                pose: *pose,
                visible: visible_mask(t.occupancy(), pose, &depth, &s.intrinsics, &camera_pose, tau),
            })
            .collect();
        Ok(RenderedFrame {
            depth,
            instance,
            gt: GroundTruthFrame {
                frame,
                camera_pose,
                objects,
            },
        })
    }

    /// Frames rendered lazily, one at a time.
    pub fn frames(&self, tau: f64, noise_seed: u64) -> impl Iterator<Item = Result<RenderedFrame>> + '_ {
        (0..self.script.frame_count).map(move |f| self.render_frame(f, tau, noise_seed))
    }
}

/// Renders every frame of a script.
pub fn render_sequence(script: &SceneScript, tau: f64, noise_seed: u64) -> Result<Vec<RenderedFrame>> {
    let scene = Scene::new(script.clone())?;
    scene.frames(tau, noise_seed).collect()
}
