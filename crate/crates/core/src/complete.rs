//! Completion and correspondence oracle: per-detection completed occupancy
//! and canonical coordinates derived from ground truth, degraded by a
//! completion fraction, voxel flips and coordinate noise. Also the
//! completion and correspondence losses, and the two consumers of a
//! completion: the pose solve and the canonical-space scatter.

use serde::{Deserialize, Serialize};

use crate::detect::bce;
use crate::geom::{Box3, SimilarityTransform, Vec3};
use crate::pose::{umeyama_solve, CorrespondenceSet};
use crate::voxel::{ensure_same_dims, Dims, NocGrid, OccupancyGrid, Placement, ProbGrid};
use crate::{seed, Error, Result, OBJECT_RES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionKnobs {
    /// Fraction `f` of hidden voxels restored: 0 keeps only the visible
    /// geometry, 1 the complete object.
    pub completion_fraction: f64,
    /// Probability of flipping each crop voxel's occupancy.
    pub flip_rate: f64,
    /// Gaussian noise on canonical coordinates, canonical units.
    pub noc_sigma: f64,
}

impl Default for CompletionKnobs {
    fn default() -> Self {
        Self {
            completion_fraction: 1.0,
            flip_rate: 0.002,
            noc_sigma: 0.02,
        }
    }
}

impl CompletionKnobs {
    pub const NOISE_FREE: Self = Self {
        completion_fraction: 1.0,
        flip_rate: 0.0,
        noc_sigma: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.completion_fraction) || !unit(self.flip_rate) {
            return Err(Error::InvalidConfig(
                "completion fraction and flip rate must lie in [0, 1]".into(),
            ));
        }
        if !(self.noc_sigma >= 0.0 && self.noc_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noc_sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Ground truth needed by the oracle for one object.
#[derive(Debug, Clone, Copy)]
pub struct GtObjectView<'a> {
    pub occupancy: &'a OccupancyGrid,
    pub pose: &'a SimilarityTransform,
    /// Canonical voxels observed in the current frame.
    pub visible: &'a OccupancyGrid,
}

/// Completed geometry on the 64³ lattice covering a detection box.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionOutput {
    pub placement: Placement,
    pub occupancy: ProbGrid,
    pub noc: NocGrid,
}

impl CompletionOutput {
    pub fn dims(&self) -> Dims {
        self.occupancy.dims()
    }
}

fn canonical_index(dims: Dims, q: &Vec3) -> Option<usize> {
    let mut idx = [0usize; 3];
    for a in 0..3 {
        let g = (q[a] * dims.0[a] as f64).floor();
        if !(g >= 0.0 && g < dims.0[a] as f64) {
            return None;
        }
        idx[a] = g as usize;
    }
    Some(dims.index(idx[0], idx[1], idx[2]))
}

fn in_unit_cube(q: &Vec3) -> bool {
    q.iter().all(|c| (0.0..=1.0).contains(c))
}

/// Ground-truth occupancy sampled on a crop lattice: voxel `i` is occupied
/// when its center maps into an occupied canonical voxel.
pub fn ground_truth_crop(placement: &Placement, dims: Dims, occupancy: &OccupancyGrid, pose: &SimilarityTransform) -> OccupancyGrid {
    let inv = pose.inverse();
    let mut out = OccupancyGrid::empty(dims);
    for i in 0..dims.len() {
        let [x, y, z] = dims.coords(i);
        let q = inv.apply(&placement.voxel_center(x, y, z));
        if canonical_index(occupancy.dims(), &q).is_some_and(|c| occupancy.bits()[c]) {
            out.set_index(i, true);
        }
    }
    out
}

/// Oracle completion on the 64³ lattice covering `detection_box`.
///
/// A crop voxel whose center maps into an occupied canonical voxel is kept
/// if that voxel is visible, or else with probability `f`; each voxel is
/// then flipped with probability `flip_rate`. Occupied voxels carry their
/// exact canonical coordinate plus clamped Gaussian noise; flipped-on
/// voxels outside the canonical cube have no coordinate. All random draws
/// are keyed by `(key, voxel)`, so outputs for different `f` are coupled.
pub fn oracle_complete(
    detection_box: &Box3,
    gt: GtObjectView<'_>,
    knobs: &CompletionKnobs,
    key: u64,
) -> Result<CompletionOutput> {
    knobs.validate()?;
    let can_dims = gt.occupancy.dims();
    ensure_same_dims(can_dims, gt.visible.dims())?;
    let dims = Dims::cube(OBJECT_RES);
    let placement = Placement::covering(detection_box, dims);
    let inv = gt.pose.inverse();
    let include_key = seed::derive(key, &[seed::stream::COMPLETION]);
    let flip_key = seed::derive(key, &[seed::stream::FLIP]);
    let noise_key = seed::derive(key, &[seed::stream::NOC_NOISE]);

    let mut occupancy = ProbGrid::zeros(dims);
    let mut noc = NocGrid::empty(dims);
    let mut touched = false;
    for i in 0..dims.len() {
        let [x, y, z] = dims.coords(i);
        let q = inv.apply(&placement.voxel_center(x, y, z));
        let cell = canonical_index(can_dims, &q).filter(|&c| gt.occupancy.bits()[c]);
        touched |= cell.is_some();
        let mut occupied = match cell {
            Some(c) => gt.visible.bits()[c] || seed::uniform(include_key, i as u64) < knobs.completion_fraction,
            None => false,
        };
        if knobs.flip_rate > 0.0 && seed::uniform(flip_key, i as u64) < knobs.flip_rate {
            occupied = !occupied;
        }
        if !occupied {
            continue;
        }
        occupancy.set_index(i, 1.0);
        if cell.is_none() && !in_unit_cube(&q) {
            continue;
        }
        let mut c = q;
        if knobs.noc_sigma > 0.0 {
            for a in 0..3 {
                c[a] += knobs.noc_sigma * seed::normal(noise_key, 3 * i as u64 + a as u64);
            }
        }
        noc.set(i, c.map(|v| v.clamp(0.0, 1.0)))?;
    }
    if !touched {
        return Err(Error::EmptyOverlap);
    }
    Ok(CompletionOutput {
        placement,
        occupancy,
        noc,
    })
}

/// Mean binary cross-entropy over all voxels.
pub fn completion_loss(pred: &ProbGrid, target: &OccupancyGrid) -> Result<f64> {
    ensure_same_dims(pred.dims(), target.dims())?;
    let n = pred.values().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .values()
        .iter()
        .zip(target.bits())
        .map(|(&p, &t)| bce(p as f64, if t { 1.0 } else { 0.0 }))
        .sum();
    Ok(sum / n as f64)
}

/// Mean over support voxels of the ℓ1 distance between coordinates. Stored
/// coordinates are compared regardless of validity flags.
pub fn correspondence_loss(pred: &NocGrid, target: &NocGrid, support: &OccupancyGrid) -> Result<f64> {
    ensure_same_dims(pred.dims(), target.dims())?;
    ensure_same_dims(pred.dims(), support.dims())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in support.occupied() {
        sum += (pred.coords()[i] - target.coords()[i]).abs().sum();
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySupport);
    }
    Ok(sum / n as f64)
}

/// Occupied voxels (at `threshold`) with a valid coordinate, as
/// `(canonical, frame)` pairs.
pub fn correspondences(out: &CompletionOutput, threshold: f32) -> (Vec<Vec3>, Vec<Vec3>) {
    let dims = out.dims();
    let mut canonical = Vec::new();
    let mut frame = Vec::new();
    for (i, &p) in out.occupancy.values().iter().enumerate() {
        if p < threshold {
            continue;
        }
        if let Some(c) = out.noc.get(i) {
            let [x, y, z] = dims.coords(i);
            canonical.push(*c);
            frame.push(out.placement.voxel_center(x, y, z));
        }
    }
    (canonical, frame)
}

/// Similarity pose from the completion's correspondences.
pub fn pose_from_completion(out: &CompletionOutput, threshold: f32) -> Result<SimilarityTransform> {
    let (canonical, frame) = correspondences(out, threshold);
    umeyama_solve(&CorrespondenceSet::new(canonical, frame)?)
}

/// Scatters occupied voxels to their canonical coordinates on a 64³
/// lattice (nearest cell), keeping the maximum probability per cell.
pub fn canonical_representation(out: &CompletionOutput, threshold: f32) -> ProbGrid {
    let dims = Dims::cube(OBJECT_RES);
    let mut grid = ProbGrid::zeros(dims);
    let n = OBJECT_RES as f64;
    let values = grid.values_mut();
    for (i, &p) in out.occupancy.values().iter().enumerate() {
        if p < threshold {
            continue;
        }
        if let Some(c) = out.noc.get(i) {
            let g = c.map(|v| ((v * n).floor() as usize).min(OBJECT_RES - 1));
            let j = dims.index(g[0], g[1], g[2]);
            values[j] = values[j].max(p);
        }
    }
    grid
}
