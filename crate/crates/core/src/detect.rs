//! Object proposals from per-voxel prediction fields: mean-shift on center
//! votes, small-cluster filtering, extent pooling and class voting. Also the
//! detection losses and an oracle that derives prediction fields from
//! ground truth with configurable degradation.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geom::{Box3, Vec3};
use crate::voxel::SparseSurfaceGrid;
use crate::{Error, Result};

/// Per-surface-voxel network outputs. Offsets and extents are in voxel units.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFields {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub voxels: Vec<[usize; 3]>,
    pub objectness: Vec<f64>,
    pub center_offset: Vec<Vec3>,
    pub extents: Vec<Vec3>,
    pub class_scores: Vec<Vec<f64>>,
}

impl PredictionFields {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.voxels.len();
        if [self.objectness.len(), self.center_offset.len(), self.extents.len(), self.class_scores.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::MisalignedFields("field lengths differ from voxel count".into()));
        }
        if self.objectness.iter().any(|o| !(0.0..=1.0).contains(o)) {
            return Err(Error::MisalignedFields("objectness outside [0, 1]".into()));
        }
        if self.extents.iter().any(|e| e.iter().any(|&x| !(x > 0.0))) {
            return Err(Error::MisalignedFields("extents must be positive".into()));
        }
        if self
            .class_scores
            .iter()
            .any(|s| (s.iter().sum::<f64>() - 1.0).abs() > 1e-6 || s.iter().any(|&p| p < 0.0))
        {
            return Err(Error::MisalignedFields("class scores must be a distribution".into()));
        }
        Ok(())
    }

    /// Lattice position of voxel `i`'s center (voxel `v` sits at `v`).
    fn position(&self, i: usize) -> Vec3 {
        let v = self.voxels[i];
        Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64)
    }

    fn to_world(&self, p: &Vec3) -> Vec3 {
        self.origin + (p + Vec3::repeat(0.5)) * self.voxel_size
    }
}

/// Supervision aligned with [`PredictionFields`]; `class_id` is `Some`
/// exactly on voxels of target objects.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTargets {
    pub objectness: Vec<bool>,
    pub center_offset: Vec<Vec3>,
    pub extents: Vec<Vec3>,
    pub class_id: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionLosses {
    pub objectness: f64,
    pub center: f64,
    pub extents: f64,
    pub class: f64,
}

const LOG_EPS: f64 = 1e-12;

/// Binary cross-entropy of one prediction, with `0·ln 0 = 0` and the
/// logarithm argument floored at 1e-12.
pub fn bce(p: f64, target: f64) -> f64 {
    let mut l = 0.0;
    if target > 0.0 {
        l -= target * p.max(LOG_EPS).ln();
    }
    if target < 1.0 {
        l -= (1.0 - target) * (1.0 - p).max(LOG_EPS).ln();
    }
    l
}

/// Huber loss: `x²/2` for `|x| < 1`, `|x| − 1/2` beyond.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Objectness BCE over all voxels; offset and extent smooth-ℓ1 summed over
/// components and class cross-entropy, each averaged over target-object
/// voxels (zero when there are none).
pub fn detection_losses(pred: &PredictionFields, target: &DetectionTargets) -> Result<DetectionLosses> {
    let n = pred.len();
    if [target.objectness.len(), target.center_offset.len(), target.extents.len(), target.class_id.len()]
        .iter()
        .any(|&l| l != n)
        || [pred.objectness.len(), pred.center_offset.len(), pred.extents.len(), pred.class_scores.len()]
            .iter()
            .any(|&l| l != n)
    {
        return Err(Error::MisalignedFields("prediction and target lengths differ".into()));
    }
    let objectness = if n == 0 {
        0.0
    } else {
        pred.objectness
            .iter()
            .zip(&target.objectness)
            .map(|(&p, &t)| bce(p, if t { 1.0 } else { 0.0 }))
            .sum::<f64>()
            / n as f64
    };
    let (mut center, mut extents, mut class, mut m) = (0.0, 0.0, 0.0, 0usize);
    for i in 0..n {
        let Some(c) = target.class_id[i] else { continue };
        m += 1;
        center += (pred.center_offset[i] - target.center_offset[i]).iter().map(|&x| smooth_l1(x)).sum::<f64>();
        extents += (pred.extents[i] - target.extents[i]).iter().map(|&x| smooth_l1(x)).sum::<f64>();
        let p = pred.class_scores[i].get(c).copied().ok_or_else(|| {
            Error::MisalignedFields(format!("class {c} outside the score vector"))
        })?;
        class -= p.max(LOG_EPS).ln();
    }
    let avg = |s: f64| if m == 0 { 0.0 } else { s / m as f64 };
    Ok(DetectionLosses {
        objectness,
        center: avg(center),
        extents: avg(extents),
        class: avg(class),
    })
}

/// Mean-shift settings; defaults follow the published pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanShiftParams {
    /// Flat-kernel radius, voxels. Also the mode-merge distance.
    pub radius: f64,
    pub iterations: usize,
    pub objectness_threshold: f64,
    pub min_members: usize,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        Self {
            radius: 8.0,
            iterations: 20,
            objectness_threshold: 0.5,
            min_members: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub bbox: Box3,
    pub class_id: usize,
    /// Indices into the prediction fields.
    pub members: Vec<usize>,
    pub mean_objectness: f64,
}

/// Uniform-grid index over vote positions with cell size equal to the radius.
struct VoteIndex<'a> {
    votes: &'a [Vec3],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> VoteIndex<'a> {
    fn new(votes: &'a [Vec3], cell: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, v) in votes.iter().enumerate() {
            cells.entry(Self::key(v, cell)).or_default().push(i);
        }
        Self { votes, cell, cells }
    }

    fn key(p: &Vec3, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    /// Sum and count of votes within `radius` of `p`, accumulated in vote
    /// index order so the result does not depend on hash iteration order.
    fn window(&self, p: &Vec3, radius: f64) -> (Vec3, usize) {
        let k = Self::key(p, self.cell);
        let mut idx = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(c) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        idx.extend(c.iter().copied().filter(|&i| (self.votes[i] - p).norm() <= radius));
                    }
                }
            }
        }
        idx.sort_unstable();
        let sum = idx.iter().fold(Vec3::zeros(), |acc, &i| acc + self.votes[i]);
        (sum, idx.len())
    }
}

/// Clusters center votes of confident voxels into object proposals.
///
/// Seeds are the distinct votes binned at half the kernel radius; each seed
/// runs `iterations` flat-kernel mean-shift steps. Modes are kept in order of
/// decreasing window count (ties: lowest seed), dropping any within `radius`
/// of a kept mode. Every vote joins its nearest kept mode (ties: lowest
/// mode), and clusters below `min_members` are discarded.
pub fn mean_shift_proposals(fields: &PredictionFields, params: &MeanShiftParams) -> Result<Vec<Proposal>> {
    fields.validate()?;
    let mut order: Vec<usize> = (0..fields.len())
        .filter(|&i| fields.objectness[i] >= params.objectness_threshold)
        .collect();
    // canonical order makes the result independent of input voxel order
    order.sort_unstable_by_key(|&i| fields.voxels[i]);
    let votes: Vec<Vec3> = order
        .iter()
        .map(|&i| fields.position(i) + fields.center_offset[i])
        .collect();
    if votes.is_empty() {
        return Ok(Vec::new());
    }
    let r = params.radius;
    let index = VoteIndex::new(&votes, r);

    let bin = r / 2.0;
    let mut seeds: Vec<[i64; 3]> = votes.iter().map(|v| VoteIndex::key(v, bin)).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut modes: Vec<(Vec3, usize)> = seeds
        .iter()
        .filter_map(|s| {
            let mut p = (Vec3::new(s[0] as f64, s[1] as f64, s[2] as f64) + Vec3::repeat(0.5)) * bin;
            let mut count = 0;
            for _ in 0..params.iterations {
                let (sum, c) = index.window(&p, r);
                if c == 0 {
                    break;
                }
                let next = sum / c as f64;
                count = c;
                if next == p {
                    break;
                }
                p = next;
            }
            (count > 0).then_some((p, count))
        })
        .collect();
    // stable sort keeps the lowest seed first among equal counts
    modes.sort_by(|a, b| b.1.cmp(&a.1));
    let mut kept: Vec<Vec3> = Vec::new();
    for (p, _) in modes {
        if kept.iter().all(|k| (k - p).norm() > r) {
            kept.push(p);
        }
    }
    if kept.is_empty() {
        return Ok(Vec::new());
    }

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); kept.len()];
    for (vi, v) in votes.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, k) in kept.iter().enumerate() {
            let d = (k - v).norm_squared();
            if d < best_d {
                best_d = d;
                best = m;
            }
        }
        clusters[best].push(order[vi]);
    }

    let num_classes = fields.class_scores.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for (mode, members) in kept.iter().zip(clusters) {
        if members.len() < params.min_members {
            continue;
        }
        let n = members.len() as f64;
        let ext = members.iter().fold(Vec3::zeros(), |acc, &i| acc + fields.extents[i]) / n;
        let mut votes_per_class = vec![0usize; num_classes.max(1)];
        for &i in &members {
            votes_per_class[argmax(&fields.class_scores[i])] += 1;
        }
        // ties go to the lowest class id
        let class_id = votes_per_class
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(c, _)| c);
        let mean_objectness = members.iter().map(|&i| fields.objectness[i]).sum::<f64>() / n;
        let mut members = members;
        members.sort_unstable();
        out.push(Proposal {
            bbox: Box3::new(fields.to_world(mode), ext * fields.voxel_size)?,
            class_id,
            members,
            mean_objectness,
        });
    }
    Ok(out)
}

fn argmax(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &s)| if s > best.1 { (i, s) } else { best })
        .0
}

/// Ground-truth object a surface voxel belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceTarget {
    pub bbox: Box3,
    pub class_id: usize,
}

/// Targets from per-voxel instance labels (indices into `instances`).
pub fn oracle_targets(
    surface: &SparseSurfaceGrid,
    labels: &[Option<usize>],
    instances: &[InstanceTarget],
) -> Result<DetectionTargets> {
    if labels.len() != surface.len() {
        return Err(Error::MisalignedFields("one label per surface voxel required".into()));
    }
    let vs = surface.voxel_size;
    let mut t = DetectionTargets {
        objectness: Vec::with_capacity(labels.len()),
        center_offset: Vec::with_capacity(labels.len()),
        extents: Vec::with_capacity(labels.len()),
        class_id: Vec::with_capacity(labels.len()),
    };
    for (v, l) in surface.voxels.iter().zip(labels) {
        match l.map(|k| instances.get(k)) {
            Some(Some(inst)) => {
                t.objectness.push(true);
                t.center_offset.push((inst.bbox.center() - surface.voxel_center(v)) / vs);
                t.extents.push(inst.bbox.extents() / vs);
                t.class_id.push(Some(inst.class_id));
            }
            Some(None) => {
                return Err(Error::MisalignedFields("label refers to a missing instance".into()));
            }
            None => {
                t.objectness.push(false);
                t.center_offset.push(Vec3::zeros());
                t.extents.push(Vec3::repeat(1.0));
                t.class_id.push(None);
            }
        }
    }
    Ok(t)
}

/// Degradation applied by [`oracle_predictions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorKnobs {
    /// Probability of flipping each voxel's objectness.
    pub objectness_flip: f64,
    /// Gaussian jitter on center offsets, voxels.
    pub center_sigma: f64,
    /// Gaussian jitter on extents, voxels.
    pub extents_sigma: f64,
    /// Probability of replacing a voxel's class with a random other class.
    pub class_confusion: f64,
}

impl Default for DetectorKnobs {
    fn default() -> Self {
        Self {
            objectness_flip: 0.0,
            center_sigma: 0.5,
            extents_sigma: 0.5,
            class_confusion: 0.05,
        }
    }
}

impl DetectorKnobs {
    pub const NOISE_FREE: Self = Self {
        objectness_flip: 0.0,
        center_sigma: 0.0,
        extents_sigma: 0.0,
        class_confusion: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let p = |x: f64| (0.0..=1.0).contains(&x);
        if !p(self.objectness_flip) || !p(self.class_confusion) {
            return Err(Error::InvalidConfig("detector flip rates must lie in [0, 1]".into()));
        }
        if !(self.center_sigma >= 0.0 && self.extents_sigma >= 0.0) {
            return Err(Error::InvalidConfig("detector sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

/// Smallest predicted extent, voxels.
const MIN_EXTENT: f64 = 0.1;

/// Noisy predictions from targets: objectness flips, offset and extent
/// jitter, class confusion. Class scores are one-hot.
pub fn oracle_predictions(
    surface: &SparseSurfaceGrid,
    targets: &DetectionTargets,
    num_classes: usize,
    knobs: &DetectorKnobs,
    rng: &mut impl Rng,
) -> Result<PredictionFields> {
    knobs.validate()?;
    let n = surface.len();
    if targets.objectness.len() != n {
        return Err(Error::MisalignedFields("targets do not match the surface".into()));
    }
    let jitter_c = Normal::new(0.0, knobs.center_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let jitter_d = Normal::new(0.0, knobs.extents_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut f = PredictionFields {
        origin: surface.origin,
        voxel_size: surface.voxel_size,
        voxels: surface.voxels.clone(),
        objectness: Vec::with_capacity(n),
        center_offset: Vec::with_capacity(n),
        extents: Vec::with_capacity(n),
        class_scores: Vec::with_capacity(n),
    };
    for i in 0..n {
        let mut o = targets.objectness[i];
        if knobs.objectness_flip > 0.0 && rng.gen_bool(knobs.objectness_flip) {
            o = !o;
        }
        f.objectness.push(if o { 1.0 } else { 0.0 });
        let mut jit = |d: &Normal<f64>, sigma: f64| {
            if sigma > 0.0 {
                Vec3::new(d.sample(rng), d.sample(rng), d.sample(rng))
            } else {
                Vec3::zeros()
            }
        };
        f.center_offset.push(targets.center_offset[i] + jit(&jitter_c, knobs.center_sigma));
        let e = targets.extents[i] + jit(&jitter_d, knobs.extents_sigma);
        f.extents.push(e.map(|x| x.max(MIN_EXTENT)));
        let mut c = targets.class_id[i].unwrap_or(0);
        if num_classes > 1 && knobs.class_confusion > 0.0 && rng.gen_bool(knobs.class_confusion) {
            c = (c + rng.gen_range(1..num_classes)) % num_classes;
        }
        let mut scores = vec![0.0; num_classes.max(1)];
        let last = scores.len() - 1;
        scores[c.min(last)] = 1.0;
        f.class_scores.push(scores);
    }
    Ok(f)
}
